"""Command-line pipeline: synth, train, eval, embed, cluster, classify, monitor, export.

One JSON run config drives every stage.  Schema violations (wrong types,
unknown keys, missing sections) fail with a usage error before any file is
touched, and every artifact write is deterministic: re-running a command
with the same config and inputs reproduces its outputs byte for byte.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical or
training error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__, dataset, embedding, neuralcore, synthplant
from .errors import (
    DataError,
    FormatError,
    NumericalError,
    TrainingError,
    UsageError,
)

__all__ = ["dispatch", "main", "load_run_config"]


# ---------------------------------------------------------------------------
# run configuration


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)
            and math.isfinite(v))


def _check_keys(doc: dict, allowed, where: str) -> None:
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise UsageError(f"{where}: unknown keys {unknown}")


def _int_list(v, where: str) -> list[int]:
    if not isinstance(v, list) or not v or not all(_is_int(x) for x in v):
        raise UsageError(f"{where} must be a non-empty list of integers")
    return [int(x) for x in v]


_TOP_KEYS = (
    "model",
    "output_channels",
    "train_fraction",
    "pca_components",
    "clusters",
    "svm_gamma",
    "svm_c",
    "cluster_space",
    "grid_resolution",
    "seed",
    "synth",
)
_SYNTH_KEYS = ("n_channels", "targets", "length", "seed", "dwell_range", "noise_std")


def load_run_config(path) -> dict:
    """Read and validate a run config; returns a normalized dict.

    Unknown keys anywhere in the document are rejected.  Optional fields
    come back with their defaults filled in; the "model" section (when
    present) is parsed into a :class:`neuralcore.ModelConfig` under the
    "model_config" key.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot open config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    _check_keys(doc, _TOP_KEYS, f"{path}")

    cfg: dict = {
        "train_fraction": 0.7,
        "pca_components": 2,
        "clusters": 2,
        "svm_gamma": 4.0,
        "svm_c": 1.0,
        "cluster_space": "pca",
        "grid_resolution": 100,
        "seed": 0,
        "model_config": None,
        "output_channels": None,
        "synth": None,
    }

    if "train_fraction" in doc:
        v = doc["train_fraction"]
        if not _is_real(v) or not 0.0 < v < 1.0:
            raise UsageError(f"{path}: train_fraction must lie in (0, 1)")
        cfg["train_fraction"] = float(v)
    for key, low in (("pca_components", 1), ("clusters", 1), ("grid_resolution", 2)):
        if key in doc:
            if not _is_int(doc[key]) or doc[key] < low:
                raise UsageError(f"{path}: {key} must be an integer >= {low}")
            cfg[key] = doc[key]
    for key in ("svm_gamma", "svm_c"):
        if key in doc:
            if not _is_real(doc[key]) or doc[key] <= 0:
                raise UsageError(f"{path}: {key} must be a positive number")
            cfg[key] = float(doc[key])
    if "cluster_space" in doc:
        if doc["cluster_space"] not in ("pca", "context"):
            raise UsageError(f"{path}: cluster_space must be 'pca' or 'context'")
        cfg["cluster_space"] = doc["cluster_space"]
    if "seed" in doc:
        if not _is_int(doc["seed"]):
            raise UsageError(f"{path}: seed must be an integer")
        cfg["seed"] = doc["seed"]

    if "model" in doc:
        if not isinstance(doc["model"], dict):
            raise UsageError(f"{path}: model section must be an object")
        try:
            cfg["model_config"] = neuralcore.ModelConfig.from_dict(doc["model"])
        except UsageError as exc:
            raise UsageError(f"{path}: model section: {exc}") from exc

    if "output_channels" in doc:
        chans = _int_list(doc["output_channels"], f"{path}: output_channels")
        if len(set(chans)) != len(chans):
            raise UsageError(f"{path}: output_channels must be distinct")
        cfg["output_channels"] = chans
        mc = cfg["model_config"]
        if mc is not None:
            if len(chans) != mc.K:
                raise UsageError(
                    f"{path}: {len(chans)} output_channels for model K={mc.K}"
                )
            bad = [c for c in chans if not 0 <= c < mc.P]
            if bad:
                raise UsageError(
                    f"{path}: output_channels {bad} out of range for P={mc.P}"
                )

    if "synth" in doc:
        sy = doc["synth"]
        if not isinstance(sy, dict):
            raise UsageError(f"{path}: synth section must be an object")
        _check_keys(sy, _SYNTH_KEYS, f"{path}: synth")
        for key in ("n_channels", "length"):
            if key not in sy or not _is_int(sy[key]) or sy[key] < 1:
                raise UsageError(f"{path}: synth.{key} must be a positive integer")
        if "targets" not in sy:
            raise UsageError(f"{path}: synth.targets is required")
        targets = _int_list(sy["targets"], f"{path}: synth.targets")
        out = {
            "n_channels": sy["n_channels"],
            "targets": targets,
            "length": sy["length"],
            "seed": cfg["seed"],
        }
        if "seed" in sy:
            if not _is_int(sy["seed"]):
                raise UsageError(f"{path}: synth.seed must be an integer")
            out["seed"] = sy["seed"]
        if "dwell_range" in sy:
            dr = sy["dwell_range"]
            if (not isinstance(dr, list) or len(dr) != 2
                    or not all(_is_int(x) for x in dr)):
                raise UsageError(f"{path}: synth.dwell_range must be [min, max]")
            out["dwell_range"] = (dr[0], dr[1])
        if "noise_std" in sy:
            if not _is_real(sy["noise_std"]) or sy["noise_std"] < 0:
                raise UsageError(f"{path}: synth.noise_std must be >= 0")
            out["noise_std"] = float(sy["noise_std"])
        cfg["synth"] = out

    return cfg


def _require(cfg: dict, key: str, command: str):
    value = cfg.get("model_config" if key == "model" else key)
    if value is None:
        raise UsageError(f"config section '{key}' is required by '{command}'")
    return value


# ---------------------------------------------------------------------------
# shared pipeline steps


def _load_series(path, model_config) -> dataset.SeriesDataset:
    data = dataset.load_csv(path)
    if data.n_channels != model_config.P:
        raise UsageError(
            f"{path} has {data.n_channels} channels, model expects "
            f"{model_config.P}"
        )
    return data


def _scaled_split(data, model_config, train_fraction):
    """Scaler fit on rows the training windows touch; windows drawn scaled."""
    n_windows = data.length - model_config.T
    if n_windows < 2:
        raise UsageError("series too short: fewer than 2 windows")
    spec = dataset.SplitSpec(train_fraction=train_fraction)
    n_train = spec.boundary_index(n_windows)
    fit_stop = min(n_train + model_config.T - 1, data.length)
    if n_train == 0 or fit_stop < 1:
        raise UsageError("training segment is empty at this train_fraction")
    scaler = dataset.fit_scaler(data, (0, fit_stop))
    scaled = dataset.apply_scaler(scaler, data)
    windows = dataset.draw_windows(scaled, model_config.T)
    train_ws, val_ws = dataset.split_windows(windows, spec)
    return scaler, windows, train_ws, val_ws


def _infer_space(vectors_width, points_width, where: str) -> str:
    if points_width == vectors_width:
        return "context"
    return "pca"


# ---------------------------------------------------------------------------
# subcommands


def _cmd_synth(args) -> None:
    cfg = load_run_config(args.config)
    sy = _require(cfg, "synth", "synth")
    kwargs = {}
    if "dwell_range" in sy:
        kwargs["dwell_range"] = sy["dwell_range"]
    if "noise_std" in sy:
        kwargs["noise_std"] = sy["noise_std"]
    spec = synthplant.default_compressor_spec(
        sy["n_channels"], sy["targets"], seed=sy["seed"], **kwargs
    )
    series = synthplant.generate(spec, sy["length"])
    labels_out = args.labels_out or args.out + ".labels"
    dataset.write_csv(series.data, args.out)
    synthplant.write_labels(series.regime_labels, labels_out)
    print(
        f"wrote {args.out} ({series.data.length} rows x "
        f"{series.data.n_channels} channels) and {labels_out}"
    )


def _cmd_train(args) -> None:
    cfg = load_run_config(args.config)
    mc = _require(cfg, "model", "train")
    channels = _require(cfg, "output_channels", "train")
    data = _load_series(args.data, mc)
    scaler, _, train_ws, val_ws = _scaled_split(data, mc, cfg["train_fraction"])
    params, report = neuralcore.train(mc, train_ws, val_ws, channels)
    neuralcore.save_model(params, mc, channels, args.model_out)
    scaler_out = args.scaler_out or args.model_out + ".scaler.json"
    report_out = args.report_out or args.model_out + ".report.json"
    dataset.save_scaler(scaler, data.channel_names, scaler_out)
    neuralcore.save_report(report, report_out)
    if report.epochs:
        print(
            f"trained {report.epochs} epochs: train_mse={report.train_mse[-1]:.6f} "
            f"val_mse={report.val_mse[-1]:.6f}"
        )
    print(f"wrote {args.model_out}, {scaler_out}, {report_out}")


def _cmd_eval(args) -> None:
    cfg = load_run_config(args.config)
    params, mc, channels = neuralcore.load_model(args.model)
    data = _load_series(args.data, mc)
    _, _, train_ws, val_ws = _scaled_split(data, mc, cfg["train_fraction"])
    doc = {
        "train_mse": neuralcore.evaluate_mse(
            params, dataset.stack_windows(train_ws), channels
        ),
        "val_mse": neuralcore.evaluate_mse(
            params, dataset.stack_windows(val_ws), channels
        ),
        "n_train_windows": len(train_ws),
        "n_val_windows": len(val_ws),
    }
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)


def _cmd_embed(args) -> None:
    cfg = load_run_config(args.config)
    params, mc, _ = neuralcore.load_model(args.model)
    data = _load_series(args.data, mc)
    _, windows, _, _ = _scaled_split(data, mc, cfg["train_fraction"])
    emb = embedding.extract_embeddings(params, windows)
    embedding.save_embeddings(emb, args.out)
    print(f"wrote {args.out} ({len(emb)} vectors x {params.hidden_size})")


def _cmd_cluster(args) -> None:
    cfg = load_run_config(args.config)
    emb = embedding.load_embeddings(args.embeddings)
    X = emb.matrix()
    n = X.shape[0]
    boundary = dataset.SplitSpec(cfg["train_fraction"]).boundary_index(n)
    if boundary < 2:
        raise UsageError("need at least 2 training embeddings to cluster")
    pca = embedding.fit_pca(X[:boundary], cfg["pca_components"])
    if cfg["cluster_space"] == "pca":
        train_pts = embedding.project(pca, X[:boundary])
        all_pts = embedding.project(pca, X)
    else:  # full context space behind the flag
        train_pts, all_pts = X[:boundary], X
    clusters = embedding.kmeans(train_pts, cfg["clusters"], seed=cfg["seed"])
    labels = embedding.assign(clusters, all_pts)
    embedding.save_pca(pca, args.pca_out)
    embedding.save_clusters(clusters, args.clusters_out)
    if args.assignments_out:
        starts = emb.starts()
        with open(args.assignments_out, "w") as fh:
            fh.write("window_start,cluster,segment\n")
            for i in range(n):
                seg = "train" if i < boundary else "val"
                fh.write(f"{starts[i]},{int(labels[i])},{seg}\n")
    print(
        f"clustered {n} embeddings into {cfg['clusters']} groups "
        f"(inertia {clusters.inertia:.6f}); wrote {args.pca_out}, "
        f"{args.clusters_out}"
    )


def _cmd_classify(args) -> None:
    cfg = load_run_config(args.config)
    emb = embedding.load_embeddings(args.embeddings)
    pca = embedding.load_pca(args.pca)
    clusters = embedding.load_clusters(args.clusters)
    X = emb.matrix()
    n = X.shape[0]
    boundary = dataset.SplitSpec(cfg["train_fraction"]).boundary_index(n)
    space = _infer_space(X.shape[1], clusters.centroids.shape[1], args.clusters)
    pts = X if space == "context" else embedding.project(pca, X)
    km_labels = embedding.assign(clusters, pts)
    if boundary < 2 or n - boundary < 1:
        raise UsageError("need non-empty train and validation segments")
    svm = embedding.fit_svm(
        pts[:boundary],
        km_labels[:boundary],
        gamma=cfg["svm_gamma"],
        C=cfg["svm_c"],
    )
    svm_labels = embedding.classify(svm, pts)
    agree = float(np.mean(svm_labels[boundary:] == km_labels[boundary:]))
    embedding.save_svm(svm, args.svm_out)
    if args.assignments_out:
        starts = emb.starts()
        with open(args.assignments_out, "w") as fh:
            fh.write("window_start,svm_cluster,kmeans_cluster,segment\n")
            for i in range(n):
                seg = "train" if i < boundary else "val"
                fh.write(
                    f"{starts[i]},{int(svm_labels[i])},{int(km_labels[i])},{seg}\n"
                )
    print(
        f"validation agreement with k-means: {100.0 * agree:.2f}% "
        f"({int(round(agree * (n - boundary)))}/{n - boundary}); wrote {args.svm_out}"
    )


def _cmd_monitor(args) -> None:
    params, mc, _ = neuralcore.load_model(args.model)
    scaler, _ = dataset.load_scaler(args.scaler)
    pca = embedding.load_pca(args.pca)
    svm = embedding.load_svm(args.svm)
    if svm.n_features != pca.n_components:
        raise UsageError(
            "monitor needs an SVM trained on PCA projections "
            f"(svm width {svm.n_features}, pca components {pca.n_components})"
        )
    data = dataset.load_csv(args.input)
    mon = embedding.StateMonitor(params, scaler, pca, svm, mc.T)
    events = []
    for frame in data.frames:
        ev = mon.push(frame)
        if ev is not None:
            events.append(ev)
    embedding.write_events(events, args.events_out)
    if args.labels_out:
        with open(args.labels_out, "w") as fh:
            fh.write("window_start,cluster\n")
            for start, label in zip(mon.window_starts, mon.labels):
                fh.write(f"{start},{label}\n")
    print(
        f"monitored {data.length} frames -> {len(mon.labels)} windows, "
        f"{len(events)} events; wrote {args.events_out}"
    )


def _cmd_export(args) -> None:
    cfg = load_run_config(args.config)
    mc = _require(cfg, "model", "export")
    params, model_mc, channels = neuralcore.load_model(args.model)
    if model_mc != mc:
        raise UsageError("config model section does not match the model file")
    data = _load_series(args.data, mc)
    emb = embedding.load_embeddings(args.embeddings)
    pca = embedding.load_pca(args.pca)
    clusters = embedding.load_clusters(args.clusters)
    svm = embedding.load_svm(args.svm)
    reports = [(p, neuralcore.load_report(p)) for p in args.report]
    os.makedirs(args.out_dir, exist_ok=True)

    # (a) loss curves, one CSV per report
    for path, report in reports:
        stem = os.path.splitext(os.path.basename(path))[0]
        out = os.path.join(args.out_dir, f"mse_{stem}.csv")
        with open(out, "w") as fh:
            fh.write("epoch,train_mse,val_mse\n")
            for e, (tr, va) in enumerate(zip(report.train_mse, report.val_mse), 1):
                fh.write(f"{e},{tr!r},{va!r}\n")

    # (b) reconstruction heatmap data: 8 seeded validation windows
    _, _, _, val_ws = _scaled_split(data, mc, cfg["train_fraction"])
    if len(val_ws) < 8:
        raise UsageError(f"need at least 8 validation windows, have {len(val_ws)}")
    rng = np.random.default_rng(cfg["seed"])
    picks = np.sort(rng.choice(len(val_ws), size=8, replace=False))
    out = os.path.join(args.out_dir, "reconstructions.csv")
    names = [data.channel_names[c] for c in channels]
    with open(out, "w") as fh:
        fh.write("window_start,kind,step," + ",".join(names) + "\n")
        for pick in picks:
            window = val_ws[int(pick)]
            target = window.values[:, channels]
            output = neuralcore.reconstruct(params, window)
            for kind, mat in (("target", target), ("output", output)):
                for step in range(mc.T):
                    cells = ",".join(repr(float(v)) for v in mat[step])
                    fh.write(f"{window.start_index},{kind},{step},{cells}\n")

    # (c) state map: projections, trajectory edges, decision grid
    X = emb.matrix()
    n = X.shape[0]
    boundary = dataset.SplitSpec(cfg["train_fraction"]).boundary_index(n)
    space = _infer_space(X.shape[1], clusters.centroids.shape[1], args.clusters)
    pts = X if space == "context" else embedding.project(pca, X)
    labels = embedding.assign(clusters, pts)
    proj = embedding.project(pca, X)
    starts = emb.starts()
    with open(os.path.join(args.out_dir, "projection.csv"), "w") as fh:
        fh.write("window_start,pc1,pc2,cluster,segment\n")
        for i in range(n):
            seg = "train" if i < boundary else "val"
            fh.write(
                f"{starts[i]},{proj[i, 0]!r},{proj[i, 1]!r},"
                f"{int(labels[i])},{seg}\n"
            )
    with open(os.path.join(args.out_dir, "trajectory_edges.csv"), "w") as fh:
        fh.write("from_start,to_start\n")
        for i in range(n - 1):
            fh.write(f"{starts[i]},{starts[i + 1]}\n")
    if svm.n_features == 2:
        lo = proj.min(axis=0)
        hi = proj.max(axis=0)
        margin = 0.05 * (hi - lo)
        margin[margin == 0.0] = 1.0
        xs, ys, grid = embedding.decision_grid(
            svm,
            ((lo[0] - margin[0], hi[0] + margin[0]),
             (lo[1] - margin[1], hi[1] + margin[1])),
            cfg["grid_resolution"],
        )
        with open(os.path.join(args.out_dir, "decision_grid.csv"), "w") as fh:
            fh.write("x,y,cluster\n")
            for iy in range(len(ys)):
                for ix in range(len(xs)):
                    fh.write(f"{xs[ix]!r},{ys[iy]!r},{int(grid[iy, ix])}\n")
    print(f"wrote report artifacts under {args.out_dir}")


# ---------------------------------------------------------------------------
# argument parsing and dispatch


class _Parser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting with code 2."""

    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="statecoder",
        description="Operating-state recognition for multichannel sensor series.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", help="generate a synthetic plant series")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--labels-out", help="labels sidecar (default: OUT.labels)")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train the auto-encoder on a series CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--scaler-out", help="default: MODEL_OUT.scaler.json")
    p.add_argument("--report-out", help="default: MODEL_OUT.report.json")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="measure reconstruction MSE of a model")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="also write the JSON result here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("embed", help="extract context vectors for every window")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="embeddings CSV path")
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("cluster", help="fit PCA + k-means on training embeddings")
    p.add_argument("--config", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--pca-out", required=True)
    p.add_argument("--clusters-out", required=True)
    p.add_argument("--assignments-out")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser(
        "classify", help="train the RBF-SVM on k-means labels and score it"
    )
    p.add_argument("--config", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--pca", required=True)
    p.add_argument("--clusters", required=True)
    p.add_argument("--svm-out", required=True)
    p.add_argument("--assignments-out")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("monitor", help="replay a CSV as a stream, emit events")
    p.add_argument("--model", required=True)
    p.add_argument("--scaler", required=True)
    p.add_argument("--pca", required=True)
    p.add_argument("--svm", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--events-out", required=True)
    p.add_argument("--labels-out")
    p.set_defaults(func=_cmd_monitor)

    p = sub.add_parser("export", help="write plot-ready report artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--pca", required=True)
    p.add_argument("--clusters", required=True)
    p.add_argument("--svm", required=True)
    p.add_argument(
        "--report",
        action="append",
        required=True,
        help="training report JSON (repeatable)",
    )
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_export)

    return parser


def dispatch(argv=None) -> int:
    """Run one CLI invocation; returns the process exit code."""
    try:
        args = _build_parser().parse_args(argv)
        args.func(args)
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
