"""Context-vector extraction, trajectory geometry, stream monitoring."""
import numpy as np
import pytest

from statecoder.dataset import (
    ScalingStats,
    SeriesDataset,
    apply_scaler,
    draw_windows,
    fit_scaler,
)
from statecoder.embedding import (
    ClusterChangeEvent,
    EmbeddingSet,
    StateMonitor,
    extract_embeddings,
    fit_pca,
    fit_svm,
    load_embeddings,
    project,
    read_events,
    save_embeddings,
    trajectory_smoothness,
    write_events,
)
from statecoder.errors import UsageError
from statecoder.neuralcore import ModelConfig, encode, init_params
from statecoder.neuralcore.model import ContextVector


def small_setup(P=3, T=6, H=5, length=60, seed=0):
    cfg = ModelConfig(P=P, K=P, T=T, H=H, n_layers=2, dropout_rate=0.0)
    params = init_params(cfg, np.random.default_rng(seed))
    rng = np.random.default_rng(seed + 1)
    data = SeriesDataset(
        [f"ch{i}" for i in range(P)], rng.normal(size=(length, P))
    )
    windows = draw_windows(data, T)
    return cfg, params, data, windows


def test_extract_matches_single_window_encode():
    cfg, params, _, windows = small_setup()
    emb = extract_embeddings(params, windows)
    assert len(emb) == len(windows)
    assert emb.matrix().shape == (len(windows), cfg.H)
    assert emb.starts().tolist() == [w.start_index for w in windows]
    for i in (0, 7, len(windows) - 1):
        one = encode(params, windows[i])
        assert np.allclose(emb.vectors[i].values, one.values, atol=1e-12)
        assert emb.vectors[i].window_start == windows[i].start_index


def test_extract_is_chunk_invariant():
    _, params, _, windows = small_setup(length=40)
    a = extract_embeddings(params, windows, chunk=512)
    b = extract_embeddings(params, windows, chunk=3)
    # BLAS may accumulate differently per batch size; only ulp-level drift
    assert np.allclose(a.matrix(), b.matrix(), atol=1e-12, rtol=0)


def test_empty_window_list_gives_empty_set():
    emb = extract_embeddings(init_params(ModelConfig(P=2, K=2, T=3, H=4),
                                         np.random.default_rng(0)), [])
    assert len(emb) == 0
    assert emb.matrix().shape == (0, 0)


def test_embedding_set_rejects_unordered_starts():
    v = lambda s: ContextVector(values=np.zeros(3), window_start=s)
    with pytest.raises(UsageError):
        EmbeddingSet(vectors=[v(0), v(2), v(2)])
    with pytest.raises(UsageError):
        EmbeddingSet(vectors=[v(5), v(1)])
    with pytest.raises(UsageError):
        EmbeddingSet(
            vectors=[
                ContextVector(values=np.zeros(3), window_start=0),
                ContextVector(values=np.zeros(4), window_start=1),
            ]
        )


def test_smoothness_of_identical_vectors_is_zero():
    X = np.ones((50, 4)) * 3.0
    assert trajectory_smoothness(X) == 0.0


def test_smoothness_of_iid_vectors_is_about_one():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(400, 16))
    s = trajectory_smoothness(X)
    assert abs(s - 1.0) < 0.15


def test_smoothness_of_slow_walk_is_small():
    rng = np.random.default_rng(1)
    # long random walk with tiny steps: consecutive distances are ~1% of
    # the typical cloud distance
    steps = 0.01 * rng.normal(size=(2000, 8))
    X = np.cumsum(steps, axis=0)
    assert trajectory_smoothness(X) < 0.2


def test_smoothness_needs_three_vectors():
    with pytest.raises(UsageError):
        trajectory_smoothness(np.zeros((2, 4)))


def test_smoothness_accepts_embedding_sets():
    _, params, _, windows = small_setup(length=30)
    emb = extract_embeddings(params, windows)
    a = trajectory_smoothness(emb)
    b = trajectory_smoothness(emb.matrix())
    assert a == b


def test_embeddings_csv_round_trip(tmp_path):
    _, params, _, windows = small_setup(length=25)
    emb = extract_embeddings(params, windows)
    path = tmp_path / "emb.csv"
    save_embeddings(emb, path)
    loaded = load_embeddings(path)
    assert np.array_equal(loaded.matrix(), emb.matrix())
    assert np.array_equal(loaded.starts(), emb.starts())


def full_monitor_setup(length=80):
    cfg, params, data, windows = small_setup(length=length, seed=3)
    stats = fit_scaler(data, (0, length - 1))
    scaled = apply_scaler(stats, data)
    scaled_windows = draw_windows(scaled, cfg.T)
    emb = extract_embeddings(params, scaled_windows)
    pca = fit_pca(emb.matrix(), 2)
    proj = project(pca, emb.matrix())
    # synthetic labels from the sign of the first component
    labels = (proj[:, 0] > 0).astype(int)
    if labels.min() == labels.max():  # guard: force both classes
        labels[0] = 1 - labels[0]
    svm = fit_svm(proj, labels, gamma=4.0, C=1.0)
    return cfg, params, data, scaled_windows, stats, pca, svm


def test_stream_labels_match_batch_classification():
    cfg, params, data, scaled_windows, stats, pca, svm = full_monitor_setup()
    from statecoder.embedding import classify

    emb = extract_embeddings(params, scaled_windows)
    batch_labels = classify(svm, project(pca, emb.matrix()))

    mon = StateMonitor(params, stats, pca, svm, cfg.T)
    for frame in data.frames:
        mon.push(frame)
    # the stream also emits the final trailing window; the prefix must agree
    assert mon.labels[: len(batch_labels)] == batch_labels.tolist()
    assert len(mon.labels) == len(batch_labels) + 1
    assert mon.window_starts[: len(batch_labels)] == [
        w.start_index for w in scaled_windows
    ]


def test_events_fire_exactly_at_label_changes():
    cfg, params, data, _, stats, pca, svm = full_monitor_setup()
    mon = StateMonitor(params, stats, pca, svm, cfg.T)
    events = []
    for frame in data.frames:
        ev = mon.push(frame)
        if ev is not None:
            events.append(ev)
    assert events, "expected at least the start event"
    first = events[0]
    assert first.start and first.from_cluster == -1
    assert first.at_index == mon.window_starts[0]
    assert first.to_cluster == mon.labels[0]

    changes = {
        mon.window_starts[i]: (mon.labels[i - 1], mon.labels[i])
        for i in range(1, len(mon.labels))
        if mon.labels[i] != mon.labels[i - 1]
    }
    rest = events[1:]
    assert {e.at_index for e in rest} == set(changes)
    for e in rest:
        assert not e.start
        assert (e.from_cluster, e.to_cluster) == changes[e.at_index]


def test_monitor_rejects_wrong_frame_width():
    cfg, params, data, _, stats, pca, svm = full_monitor_setup()
    wrong = ScalingStats(mean=np.zeros(2), std=np.ones(2))
    with pytest.raises(UsageError):
        StateMonitor(params, wrong, pca, svm, cfg.T)


def test_change_event_rejects_no_op():
    with pytest.raises(UsageError):
        ClusterChangeEvent(at_index=3, from_cluster=1, to_cluster=1)


def test_event_log_round_trip(tmp_path):
    events = [
        ClusterChangeEvent(at_index=0, from_cluster=-1, to_cluster=1, start=True),
        ClusterChangeEvent(at_index=17, from_cluster=1, to_cluster=0),
        ClusterChangeEvent(at_index=40, from_cluster=0, to_cluster=2),
    ]
    path = tmp_path / "events.jsonl"
    write_events(events, path)
    text = path.read_text().splitlines()
    assert len(text) == 3
    assert '"start":true' in text[0]
    assert "start" not in text[1]
    assert read_events(path) == events
