"""Shared domain vocabulary: recordings, montage, frequency bands, phases, feature tables.

Units are fixed throughout the package: raw samples are microvolts (uV),
spectral density is uV^2/Hz, and "band power" always means the mean spectral
density over the frequency bins inside a band. All types here are immutable
values after construction and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Phase(Enum):
    """Experimental phase: baseline before, stimulus exposure, baseline after."""

    PRE_B = "PreB"
    VRX = "VRX"
    POST_B = "PostB"


PHASE_ORDER: tuple[Phase, ...] = (Phase.PRE_B, Phase.VRX, Phase.POST_B)


class Region(Enum):
    """Scalp region backed by a homologous left/right electrode pair."""

    FRONTAL = "Frontal"
    CENTRAL = "Central"
    PARIETAL = "Parietal"


REGION_ORDER: tuple[Region, ...] = (Region.FRONTAL, Region.CENTRAL, Region.PARIETAL)


@dataclass(frozen=True)
class Band:
    """One frequency band, interpreted as the half-open interval [low_hz, high_hz)."""

    name: str
    low_hz: float
    high_hz: float

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("band name must be non-empty")
        if not (0.0 < self.low_hz < self.high_hz):
            raise ValueError(
                f"band {self.name}: edges must satisfy 0 < low < high, "
                f"got [{self.low_hz}, {self.high_hz})"
            )


@dataclass(frozen=True)
class BandSet:
    """Ordered, non-overlapping bands.

    Every band selects frequencies in [low, high) except the last band, whose
    upper edge is inclusive so the set can tile up to an exact boundary such
    as 50 Hz without dropping the edge bin.
    """

    bands: tuple[Band, ...]

    def __post_init__(self) -> None:
        if len(self.bands) == 0:
            raise ValueError("band set must contain at least one band")
        names = [b.name for b in self.bands]
        if len(set(names)) != len(names):
            raise ValueError("band names must be unique")
        for prev, cur in zip(self.bands, self.bands[1:]):
            if cur.low_hz < prev.high_hz:
                raise ValueError(
                    f"bands {prev.name} and {cur.name} overlap or are out of order"
                )

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(b.name for b in self.bands)

    @property
    def max_edge_hz(self) -> float:
        return self.bands[-1].high_hz

    def band(self, name: str) -> Band:
        for b in self.bands:
            if b.name == name:
                return b
        raise KeyError(f"unknown band {name!r}")

    def bin_indices(self, freqs_hz: np.ndarray) -> dict[str, np.ndarray]:
        """Map band name to indices of frequency bins whose center lies in the band."""
        freqs = np.asarray(freqs_hz, dtype=float)
        out: dict[str, np.ndarray] = {}
        last = self.bands[-1]
        for b in self.bands:
            if b is last:
                mask = (freqs >= b.low_hz) & (freqs <= b.high_hz)
            else:
                mask = (freqs >= b.low_hz) & (freqs < b.high_hz)
            out[b.name] = np.flatnonzero(mask)
        return out

    def to_jsonable(self) -> list[dict]:
        return [
            {"name": b.name, "low_hz": b.low_hz, "high_hz": b.high_hz}
            for b in self.bands
        ]

    @staticmethod
    def from_jsonable(items: list[dict]) -> "BandSet":
        return BandSet(tuple(Band(d["name"], d["low_hz"], d["high_hz"]) for d in items))


def default_bands() -> BandSet:
    """Delta/Theta/Alpha/Beta/Gamma tiling [0.5, 50] Hz with half-open interiors."""
    return BandSet(
        (
            Band("Delta", 0.5, 4.0),
            Band("Theta", 4.0, 8.0),
            Band("Alpha", 8.0, 13.0),
            Band("Beta", 13.0, 28.0),
            Band("Gamma", 28.0, 50.0),
        )
    )


@dataclass(frozen=True)
class Montage:
    """Channel labels plus the left/right pair backing each region."""

    channels: tuple[str, ...]
    region_pairs: dict[Region, tuple[str, str]] = field(compare=True)

    def __post_init__(self) -> None:
        if len(set(self.channels)) != len(self.channels):
            raise ValueError("duplicate channel labels in montage")
        have = set(self.channels)
        for region, (left, right) in self.region_pairs.items():
            missing = {left, right} - have
            if missing:
                raise ValueError(
                    f"{region.value} pair references channels missing from montage: "
                    f"{sorted(missing)}"
                )

    def pair(self, region: Region) -> tuple[str, str]:
        try:
            return self.region_pairs[region]
        except KeyError:
            raise KeyError(f"montage has no pair for region {region.value}") from None

    def to_jsonable(self) -> dict:
        return {
            "channels": list(self.channels),
            "region_pairs": {
                r.value: list(pair) for r, pair in self.region_pairs.items()
            },
        }

    @staticmethod
    def from_jsonable(d: dict) -> "Montage":
        pairs = {
            Region(name): (pair[0], pair[1])
            for name, pair in d["region_pairs"].items()
        }
        return Montage(tuple(d["channels"]), pairs)


def default_montage() -> Montage:
    """Nine-channel 10/20 layout over frontal, central and parietal sites."""
    return Montage(
        channels=("F3", "Fz", "F4", "C3", "Cz", "C4", "P3", "POz", "P4"),
        region_pairs={
            Region.FRONTAL: ("F3", "F4"),
            Region.CENTRAL: ("C3", "C4"),
            Region.PARIETAL: ("P3", "P4"),
        },
    )


@dataclass(frozen=True, eq=False)
class Recording:
    """Multi-channel time series in microvolts.

    ``data`` has shape (n_channels, n_samples) and is stored as a read-only
    float64 copy, so a Recording cannot be mutated after construction.
    """

    sample_rate_hz: float
    channels: tuple[str, ...]
    data: np.ndarray
    participant_id: str = ""

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        try:
            arr = np.array(self.data, dtype=np.float64, copy=True)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"ragged channel rows: {exc}") from exc
        if arr.ndim != 2:
            raise ValueError(f"data must be 2-D (channels x samples), got ndim={arr.ndim}")
        if arr.shape[0] != len(self.channels):
            raise ValueError(
                f"{len(self.channels)} channel labels but {arr.shape[0]} data rows"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def channel_index(self, label: str) -> int:
        try:
            return self.channels.index(label)
        except ValueError:
            raise KeyError(f"recording has no channel {label!r}") from None


@dataclass(frozen=True)
class PhaseMarkers:
    """Sample-index spans [start, end) for the three phases.

    Spans must be in PreB < VRX < PostB order, non-overlapping and each of
    positive length. Anything outside the spans (such as a familiarization
    prefix) is simply not covered and gets dropped at segmentation.
    """

    spans: dict[Phase, tuple[int, int]]

    def __post_init__(self) -> None:
        missing = [p.value for p in PHASE_ORDER if p not in self.spans]
        if missing:
            raise ValueError(f"missing phase {', '.join(missing)}")
        clean: dict[Phase, tuple[int, int]] = {}
        for phase in PHASE_ORDER:
            start, end = self.spans[phase]
            start, end = int(start), int(end)
            if start < 0:
                raise ValueError(f"{phase.value}: start sample must be >= 0")
            if end <= start:
                raise ValueError(f"{phase.value}: span must have positive length")
            clean[phase] = (start, end)
        for a, b in zip(PHASE_ORDER, PHASE_ORDER[1:]):
            if clean[a][1] > clean[b][0]:
                raise ValueError(
                    f"phase order violated: {a.value} must end before {b.value} starts"
                )
        object.__setattr__(self, "spans", clean)

    def span(self, phase: Phase) -> tuple[int, int]:
        return self.spans[phase]

    @property
    def end_sample(self) -> int:
        return self.spans[Phase.POST_B][1]

    def validate_within(self, recording: Recording) -> None:
        if self.end_sample > recording.n_samples:
            raise ValueError(
                f"out of bounds: markers end at sample {self.end_sample} but the "
                f"recording has {recording.n_samples} samples"
            )


@dataclass(frozen=True)
class Violation:
    """One invariant breach found by validate_recording. Data, not an exception."""

    kind: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


_MAX_NONFINITE_REPORTS = 20


def validate_recording(recording: Recording, bands: BandSet) -> list[Violation]:
    """Check a recording against the active band set.

    Returns every violation found (empty list means the recording is valid):
    an empty sample axis, non-finite samples with their (channel, index)
    location, and a sampling rate that cannot represent the highest band edge.
    """
    violations: list[Violation] = []
    if recording.n_samples < 1:
        violations.append(Violation("empty", "recording has no samples"))
    if recording.sample_rate_hz <= 2.0 * bands.max_edge_hz:
        violations.append(
            Violation(
                "nyquist",
                f"sample rate {recording.sample_rate_hz:g} Hz cannot resolve the "
                f"{bands.max_edge_hz:g} Hz band edge (needs > {2 * bands.max_edge_hz:g} Hz)",
            )
        )
    bad = ~np.isfinite(recording.data)
    if bad.any():
        rows, cols = np.nonzero(bad)
        for ch, idx in list(zip(rows, cols))[:_MAX_NONFINITE_REPORTS]:
            violations.append(
                Violation(
                    "non-finite",
                    f"non-finite sample at (channel {recording.channels[ch]}, index {idx})",
                )
            )
        extra = rows.size - _MAX_NONFINITE_REPORTS
        if extra > 0:
            violations.append(
                Violation("non-finite", f"{extra} further non-finite samples not listed")
            )
    return violations


PowerKey = tuple[str, Phase, str, str]  # (participant, phase, channel, band)
AsymKey = tuple[str, Phase, Region, str]  # (participant, phase, region, band)


@dataclass
class PowerTable:
    """Mean spectral density per (participant, phase, channel, band) in uV^2/Hz."""

    values: dict[PowerKey, float] = field(default_factory=dict)

    def get(self, participant: str, phase: Phase, channel: str, band: str) -> float:
        return self.values[(participant, phase, channel, band)]

    @property
    def participants(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for (pid, _, _, _) in self.values:
            seen.setdefault(pid, None)
        return tuple(seen)

    def update(self, other: "PowerTable") -> None:
        self.values.update(other.values)

    def check(
        self,
        participants: tuple[str, ...],
        phases: tuple[Phase, ...],
        channels: tuple[str, ...],
        bands: tuple[str, ...],
    ) -> None:
        """Raise if any cell is missing, non-finite or negative."""
        for pid in participants:
            for phase in phases:
                for ch in channels:
                    for band in bands:
                        key = (pid, phase, ch, band)
                        if key not in self.values:
                            raise ValueError(f"power table missing cell {key}")
                        v = self.values[key]
                        if not math.isfinite(v) or v < 0:
                            raise ValueError(f"invalid power {v!r} at {key}")


@dataclass
class AsymmetryTable:
    """Right-minus-left mean density per (participant, phase, region, band), signed."""

    values: dict[AsymKey, float] = field(default_factory=dict)

    def get(self, participant: str, phase: Phase, region: Region, band: str) -> float:
        return self.values[(participant, phase, region, band)]

    def update(self, other: "AsymmetryTable") -> None:
        self.values.update(other.values)
