"""Synthetic multichannel plant generator with regime switching.

Produces piecewise-stationary series that mimic a machine moving between
discrete operating states: every channel emits its per-state baseline plus
i.i.d. Gaussian noise, and regimes persist for a uniformly drawn dwell time
before switching.  Designated *lead* channels anticipate the next regime:
they jump to the upcoming state's baseline L steps before the actual
boundary, the way upstream measurements react before key downstream ones.

The generated label track records the true regime per step, so windowed
models can be scored against ground truth.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import SeriesDataset
from .errors import ConfigurationError, DataError, UsageError

__all__ = [
    "PlantSpec",
    "LabeledSeries",
    "generate",
    "default_compressor_spec",
    "window_majority_labels",
    "write_labels",
    "load_labels",
]

_NAME_GROUPS = ("PRESS", "TEMP", "VIB", "SPEED")


def _channel_names(n_channels: int) -> list[str]:
    """Name channels in four contiguous instrument groups, pressures first."""
    block = max(1, -(-n_channels // len(_NAME_GROUPS)))  # ceil division
    return [
        f"{_NAME_GROUPS[min(i // block, len(_NAME_GROUPS) - 1)]}{i:03d}"
        for i in range(n_channels)
    ]


@dataclass(frozen=True)
class PlantSpec:
    """Configuration of the synthetic plant.

    Attributes
    ----------
    n_channels : number of output channels P
    n_states : number of operating regimes
    state_means : (n_states, n_channels) baseline per regime and channel
    lead_map : (lead_channel, target_channel, lag) triples; the lead channel
        switches ``lag`` steps before every regime boundary
    dwell_range : inclusive (min, max) regime duration in steps
    noise_std : per-step Gaussian noise level (0 disables noise)
    seed : RNG seed; same spec + seed reproduces the series bit for bit
    """

    n_channels: int
    n_states: int
    state_means: np.ndarray
    lead_map: tuple[tuple[int, int, int], ...] = ()
    dwell_range: tuple[int, int] = (220, 340)
    noise_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_channels < 1:
            raise ConfigurationError("n_channels must be at least 1")
        if self.n_states < 1:
            raise ConfigurationError("n_states must be at least 1")
        means = np.array(self.state_means, dtype=np.float64)
        if means.shape != (self.n_states, self.n_channels):
            raise ConfigurationError(
                f"state_means has shape {means.shape}, expected "
                f"({self.n_states}, {self.n_channels})"
            )
        if not np.all(np.isfinite(means)):
            raise ConfigurationError("state_means must be finite")
        means.setflags(write=False)
        object.__setattr__(self, "state_means", means)
        object.__setattr__(
            self, "lead_map", tuple(tuple(p) for p in self.lead_map)
        )
        dmin, dmax = self.dwell_range
        if not (1 <= dmin <= dmax):
            raise ConfigurationError("dwell_range must satisfy 1 <= min <= max")
        if self.noise_std < 0:
            raise ConfigurationError("noise_std must be non-negative")
        targets = {t for _, t, _ in self.lead_map}
        for lead, target, lag in self.lead_map:
            for ch, role in ((lead, "lead"), (target, "target")):
                if not 0 <= ch < self.n_channels:
                    raise ConfigurationError(
                        f"{role} channel {ch} out of range for "
                        f"{self.n_channels} channels"
                    )
            if lead == target:
                raise ConfigurationError(
                    f"channel {lead} cannot lead itself"
                )
            if lead in targets:
                raise ConfigurationError(
                    f"channel {lead} is both a lead and a target"
                )
            if lag < 1:
                raise ConfigurationError("lead lag must be at least 1")
            if dmin < 2 * lag:
                raise ConfigurationError(
                    f"dwell minimum {dmin} must be >= twice the lead lag {lag}"
                )

    @property
    def max_lag(self) -> int:
        return max((lag for _, _, lag in self.lead_map), default=0)

    @property
    def target_channels(self) -> list[int]:
        """Distinct target channels in first-appearance order."""
        seen: list[int] = []
        for _, target, _ in self.lead_map:
            if target not in seen:
                seen.append(target)
        return seen


@dataclass(frozen=True)
class LabeledSeries:
    """A generated series together with its ground-truth regime track."""

    data: SeriesDataset
    regime_labels: np.ndarray  # (T',) int64

    def __post_init__(self):
        labels = np.array(self.regime_labels, dtype=np.int64)
        if labels.ndim != 1 or labels.shape[0] != self.data.length:
            raise UsageError("regime_labels must have one entry per frame")
        labels.setflags(write=False)
        object.__setattr__(self, "regime_labels", labels)


def generate(spec: PlantSpec, length: int) -> LabeledSeries:
    """Generate ``length`` frames from the plant described by *spec*."""
    if length <= spec.dwell_range[0]:
        raise UsageError(
            f"series length {length} must exceed the dwell minimum "
            f"{spec.dwell_range[0]}"
        )
    rng = np.random.default_rng(spec.seed)
    dmin, dmax = spec.dwell_range

    labels = np.empty(length, dtype=np.int64)
    state = int(rng.integers(spec.n_states))
    t = 0
    while t < length:
        dwell = int(rng.integers(dmin, dmax + 1))
        labels[t : t + dwell] = state
        t += dwell
        if spec.n_states > 1:
            step = int(rng.integers(spec.n_states - 1))
            state = step if step < state else step + 1

    values = spec.state_means[labels]  # (length, P) baselines
    lead_lags: dict[int, int] = {}
    for lead, _, lag in spec.lead_map:
        lead_lags[lead] = max(lag, lead_lags.get(lead, 0))
    if lead_lags:
        values = values.copy()
        idx = np.arange(length)
        for lead, lag in sorted(lead_lags.items()):
            shifted = labels[np.minimum(idx + lag, length - 1)]
            values[:, lead] = spec.state_means[shifted, lead]
    if spec.noise_std > 0:
        values = values + rng.normal(0.0, spec.noise_std, size=(length, spec.n_channels))

    data = SeriesDataset(
        channel_names=_channel_names(spec.n_channels), frames=values
    )
    return LabeledSeries(data=data, regime_labels=labels)


def default_compressor_spec(
    n_channels: int,
    targets: list[int],
    seed: int = 0,
    dwell_range: tuple[int, int] = (220, 340),
    noise_std: float = 0.1,
) -> PlantSpec:
    """Two-state plant where a few key channels move subtly and the rest swing.

    Target channels (the ones a partial-reconstruction model would be asked
    to reproduce) get small between-state offsets, comparable to the noise
    level, while supporting channels move strongly; two of the supporting
    channels lead each target by 3-6 steps.  Different seeds give different
    baselines, offsets, lead assignments and lags.
    """
    if not targets:
        raise ConfigurationError("at least one target channel is required")
    if len(set(targets)) != len(targets):
        raise ConfigurationError("target channels must be distinct")
    for t in targets:
        if not 0 <= t < n_channels:
            raise ConfigurationError(
                f"target channel {t} out of range for {n_channels} channels"
            )
    pool = [c for c in range(n_channels) if c not in set(targets)]
    if not pool:
        raise ConfigurationError("need at least one non-target channel for leads")

    rng = np.random.default_rng(seed)
    base = rng.uniform(-1.0, 1.0, size=n_channels)
    signs = np.where(rng.random(n_channels) < 0.5, -1.0, 1.0)
    gaps = rng.uniform(0.8, 1.6, size=n_channels)
    gaps[targets] = rng.uniform(0.15, 0.3, size=len(targets))
    state_means = np.stack([base, base + signs * gaps])

    leads_per_target = 2 if len(pool) >= 2 * len(targets) else 1
    order = rng.permutation(len(pool))
    lead_map: list[tuple[int, int, int]] = []
    k = 0
    for target in targets:
        for _ in range(leads_per_target):
            lead = pool[order[k % len(pool)]]
            lag = int(rng.integers(3, 7))
            lead_map.append((lead, target, lag))
            k += 1

    return PlantSpec(
        n_channels=n_channels,
        n_states=2,
        state_means=state_means,
        lead_map=tuple(lead_map),
        dwell_range=dwell_range,
        noise_std=noise_std,
        seed=seed,
    )


def window_majority_labels(regime_labels: np.ndarray, T: int) -> np.ndarray:
    """Label each consecutive window by its majority regime.

    Matches the window indexing of ``dataset.draw_windows``: entry k covers
    label rows k .. k+T-1 and there are len(labels) - T entries.  Ties go to
    the lowest regime id.
    """
    labels = np.asarray(regime_labels)
    n = labels.shape[0] - T
    if n < 1:
        raise UsageError("sample length exceeds dataset")
    n_states = int(labels.max()) + 1
    out = np.empty(n, dtype=np.int64)
    counts = np.bincount(labels[0:T], minlength=n_states).astype(np.int64)
    out[0] = int(np.argmax(counts))
    for k in range(1, n):
        counts[labels[k - 1]] -= 1
        counts[labels[k + T - 1]] += 1
        out[k] = int(np.argmax(counts))
    return out


def write_labels(labels: np.ndarray, path) -> None:
    """Write one integer label per line."""
    with open(path, "w") as fh:
        for v in np.asarray(labels):
            fh.write(f"{int(v)}\n")


def load_labels(path) -> np.ndarray:
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise UsageError(f"cannot open {path}: {exc}") from exc
    try:
        return np.array([int(ln) for ln in lines], dtype=np.int64)
    except ValueError as exc:
        raise DataError(f"{path}: invalid label file: {exc}") from exc
