"""Online operating-state monitoring over a frame stream.

Each incoming frame is scaled and buffered; once a full window is available
its context vector is computed, projected into the fitted component space
and classified.  A change of class between consecutive windows emits a
:class:`ClusterChangeEvent`; the very first classified window emits a
synthetic start event (``start=True``, ``from_cluster=-1``) so consumers
know monitoring began.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator

from ..dataset import ScalingStats, StreamWindowBuffer
from ..errors import DataError, UsageError
from ..neuralcore.model import AutoencoderParams, _encode_batch
from .pca import PcaModel, project
from .svm import RbfSvmModel, classify

__all__ = [
    "ClusterChangeEvent",
    "StateMonitor",
    "monitor",
    "write_events",
    "read_events",
]


@dataclass(frozen=True)
class ClusterChangeEvent:
    """The classified state changed at window ``at_index``."""

    at_index: int
    from_cluster: int
    to_cluster: int
    start: bool = False

    def __post_init__(self):
        if self.from_cluster == self.to_cluster:
            raise UsageError("a change event needs from != to")

    def to_json(self) -> dict:
        doc = {
            "at": self.at_index,
            "from": self.from_cluster,
            "to": self.to_cluster,
        }
        if self.start:
            doc["start"] = True
        return doc


class StateMonitor:
    """Streaming pipeline: scale -> window -> encode -> project -> classify."""

    def __init__(
        self,
        params: AutoencoderParams,
        scaler: ScalingStats,
        pca: PcaModel,
        svm: RbfSvmModel,
        T: int,
    ):
        if scaler.n_channels != params.input_size:
            raise UsageError(
                f"scaler width {scaler.n_channels} != model input width "
                f"{params.input_size}"
            )
        self.params = params
        self.pca = pca
        self.svm = svm
        self.buffer = StreamWindowBuffer(scaler, T)
        self.labels: list[int] = []
        self.window_starts: list[int] = []

    def push(self, frame) -> ClusterChangeEvent | None:
        """Feed one raw frame; returns an event when the state label changes."""
        window = self.buffer.push(frame)
        if window is None:
            return None
        ctx = _encode_batch(self.params, window.values[None, :, :]).ctx[0]
        label = int(classify(self.svm, project(self.pca, ctx)))
        event = None
        if not self.labels:
            event = ClusterChangeEvent(
                at_index=window.start_index,
                from_cluster=-1,
                to_cluster=label,
                start=True,
            )
        elif label != self.labels[-1]:
            event = ClusterChangeEvent(
                at_index=window.start_index,
                from_cluster=self.labels[-1],
                to_cluster=label,
            )
        self.labels.append(label)
        self.window_starts.append(window.start_index)
        return event


def monitor(
    params: AutoencoderParams,
    scaler: ScalingStats,
    pca: PcaModel,
    svm: RbfSvmModel,
    T: int,
    frames: Iterable,
) -> Iterator[ClusterChangeEvent]:
    """Run a :class:`StateMonitor` over an iterable of frames, yielding events."""
    mon = StateMonitor(params, scaler, pca, svm, T)
    for frame in frames:
        event = mon.push(frame)
        if event is not None:
            yield event


def write_events(events: Iterable[ClusterChangeEvent], path) -> None:
    """Line-delimited JSON: {"at": n, "from": a, "to": b} per event."""
    with open(path, "w") as fh:
        for ev in events:
            fh.write(json.dumps(ev.to_json(), separators=(",", ":")) + "\n")


def read_events(path) -> list[ClusterChangeEvent]:
    try:
        with open(path) as fh:
            lines = [ln for ln in fh if ln.strip()]
    except OSError as exc:
        raise UsageError(f"cannot open {path}: {exc}") from exc
    events = []
    for lineno, ln in enumerate(lines, start=1):
        try:
            doc = json.loads(ln)
            events.append(
                ClusterChangeEvent(
                    at_index=int(doc["at"]),
                    from_cluster=int(doc["from"]),
                    to_cluster=int(doc["to"]),
                    start=bool(doc.get("start", False)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: bad event: {exc}") from exc
    return events
