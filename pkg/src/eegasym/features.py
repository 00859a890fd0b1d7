"""Asymmetry features: band powers to right-minus-left values, per cohort.

Positive asymmetry always means more right-hemisphere power. Midline channels
ride along in the power table but take no part in any asymmetry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsp
from .core import (
    PHASE_ORDER,
    REGION_ORDER,
    AsymmetryTable,
    BandSet,
    Montage,
    Phase,
    PhaseMarkers,
    PowerTable,
    Recording,
    Region,
    default_bands,
    default_montage,
    validate_recording,
)


def asymmetry(
    power_table: PowerTable, montage: Montage, mode: str = "difference"
) -> AsymmetryTable:
    """Right minus left mean density for every region pair.

    mode "difference" is the plain subtraction; "log-ratio" computes
    ln(right) - ln(left) and requires strictly positive powers. The log
    variant is opt-in for sensitivity checks and is never the default.
    """
    if mode not in ("difference", "log-ratio"):
        raise ValueError(f"unknown asymmetry mode {mode!r}")
    out = AsymmetryTable()
    for (pid, phase, channel, band), _ in power_table.values.items():
        del channel
        for region in montage.region_pairs:
            key = (pid, phase, region, band)
            if key in out.values:
                continue
            left, right = montage.pair(region)
            try:
                right_power = power_table.get(pid, phase, right, band)
                left_power = power_table.get(pid, phase, left, band)
            except KeyError as exc:
                raise ValueError(f"missing paired channel: {exc}") from exc
            if mode == "difference":
                value = right_power - left_power
            else:
                if right_power <= 0 or left_power <= 0:
                    raise ValueError(
                        f"log-ratio asymmetry needs positive powers, got "
                        f"{right_power!r}/{left_power!r} at {key}"
                    )
                value = math.log(right_power) - math.log(left_power)
            out.values[key] = value
    return out


def participant_power_table(
    recording: Recording,
    markers: PhaseMarkers,
    *,
    filter_spec: dsp.FilterSpec,
    band_set: BandSet,
    segment_len: int = 512,
    overlap: float = 0.5,
    single_window: bool = False,
) -> PowerTable:
    """Run filter, segmentation and spectral estimation for one participant.

    With single_window=True each phase is estimated from one Hann periodogram
    over its largest power-of-two prefix instead of averaged Welch segments
    (a sensitivity-check mode).
    """
    filtered = dsp.apply_filter(recording, filter_spec)
    table = PowerTable()
    for phase, sub in dsp.segment(filtered, markers).items():
        if single_window:
            seg_len = dsp.largest_pow2_at_most(sub.n_samples)
            psd = dsp.welch_psd(sub, segment_len=seg_len, overlap=0.0)
        else:
            psd = dsp.welch_psd(sub, segment_len=segment_len, overlap=overlap)
        for (channel, band), power in dsp.band_power(psd, band_set).items():
            table.values[(recording.participant_id, phase, channel, band)] = power
    return table


@dataclass(frozen=True)
class FeatureMatrix:
    """Complete cohort asymmetry values plus the band set and montage that made them."""

    participants: tuple[str, ...]
    cells: dict[tuple[str, Phase, Region, str], float]
    band_set: BandSet
    montage: Montage

    def __post_init__(self) -> None:
        for pid in self.participants:
            for phase in PHASE_ORDER:
                for region in self.montage.region_pairs:
                    for band in self.band_set.names:
                        if (pid, phase, region, band) not in self.cells:
                            raise ValueError(
                                f"feature matrix missing cell "
                                f"({pid}, {phase.value}, {region.value}, {band})"
                            )

    @property
    def band_names(self) -> tuple[str, ...]:
        return self.band_set.names

    def value(self, pid: str, phase: Phase, region: Region, band: str) -> float:
        return self.cells[(pid, phase, region, band)]

    def phase_values(self, phase: Phase, region: Region, band: str) -> np.ndarray:
        return np.array(
            [self.cells[(pid, phase, region, band)] for pid in self.participants]
        )

    def restricted(self, pids: tuple[str, ...]) -> "FeatureMatrix":
        keep = set(pids)
        cells = {k: v for k, v in self.cells.items() if k[0] in keep}
        return FeatureMatrix(
            participants=tuple(p for p in self.participants if p in keep),
            cells=cells,
            band_set=self.band_set,
            montage=self.montage,
        )

    def to_csv(self, path: str | Path, config_hash: str | None = None) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            if config_hash is not None:
                fh.write(f"# config_hash={config_hash}\n")
            fh.write("participant,phase,region,band,asym\n")
            for pid in self.participants:
                for phase in PHASE_ORDER:
                    for region in REGION_ORDER:
                        if region not in self.montage.region_pairs:
                            continue
                        for band in self.band_set.names:
                            v = self.cells[(pid, phase, region, band)]
                            fh.write(
                                f"{pid},{phase.value},{region.value},{band},{v:.17g}\n"
                            )


def read_feature_csv(path: str | Path) -> list[tuple[str, Phase, Region, str, float]]:
    """Parse a tidy feature CSV back into (participant, phase, region, band, value) rows."""
    rows: list[tuple[str, Phase, Region, str, float]] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("participant,"):
                continue
            pid, phase, region, band, value = line.split(",")
            rows.append((pid, Phase(phase), Region(region), band, float(value)))
    return rows


@dataclass(frozen=True)
class Exclusion:
    participant_id: str
    stage: str
    reason: str


def feature_matrix_from_recordings(
    recordings: dict[str, tuple[Recording, PhaseMarkers]],
    *,
    band_set: BandSet | None = None,
    montage: Montage | None = None,
    filter_low_hz: float = 0.5,
    filter_high_hz: float = 50.0,
    filter_order: int = 4,
    segment_len: int = 512,
    overlap: float = 0.5,
    single_window: bool = False,
    asymmetry_mode: str = "difference",
) -> tuple[FeatureMatrix | None, list[Exclusion]]:
    """Build the cohort feature matrix from in-memory recordings.

    Participants failing validation or any pipeline stage are dropped and
    reported rather than aborting the cohort. Returns None for the matrix if
    nobody survives.
    """
    band_set = band_set if band_set is not None else default_bands()
    montage = montage if montage is not None else default_montage()
    exclusions: list[Exclusion] = []
    power = PowerTable()
    kept: list[str] = []
    for pid, (recording, markers) in recordings.items():
        violations = validate_recording(recording, band_set)
        if violations:
            exclusions.append(Exclusion(pid, "validate", "; ".join(str(v) for v in violations[:3])))
            continue
        if set(montage.channels) - set(recording.channels):
            exclusions.append(
                Exclusion(pid, "validate", "recording is missing montage channels")
            )
            continue
        try:
            filter_spec = dsp.design_bandpass(
                filter_low_hz, filter_high_hz, recording.sample_rate_hz, filter_order
            )
            table = participant_power_table(
                recording,
                markers,
                filter_spec=filter_spec,
                band_set=band_set,
                segment_len=segment_len,
                overlap=overlap,
                single_window=single_window,
            )
        except ValueError as exc:
            exclusions.append(Exclusion(pid, "dsp", str(exc)))
            continue
        power.update(table)
        kept.append(pid)
    if not kept:
        return None, exclusions
    asym = asymmetry(power, montage, mode=asymmetry_mode)
    cells = {
        key: value
        for key, value in asym.values.items()
        if key[0] in set(kept)
    }
    matrix = FeatureMatrix(
        participants=tuple(kept),
        cells=cells,
        band_set=band_set,
        montage=montage,
    )
    return matrix, exclusions


def build_feature_matrix(
    manifest,
    *,
    band_set: BandSet | None = None,
    montage: Montage | None = None,
    **pipeline_kwargs,
) -> tuple[FeatureMatrix | None, list[Exclusion]]:
    """Load every participant in a manifest and build the feature matrix.

    Load failures become exclusions tagged with the participant id and stage,
    mirroring cohort-level quality screening.
    """
    from . import io  # local import to keep the module graph acyclic

    band_set = band_set or manifest.band_set or default_bands()
    montage = montage or manifest.montage or default_montage()
    exclusions: list[Exclusion] = []
    loaded: dict[str, tuple[Recording, PhaseMarkers]] = {}
    for entry in manifest.entries:
        try:
            recording = io.read_recording(
                entry.recording_path, band_set, participant_id=entry.participant_id
            )
        except (io.DataError, ValueError, OSError) as exc:
            exclusions.append(Exclusion(entry.participant_id, "load", str(exc)))
            continue
        try:
            markers = io.read_markers(entry.markers_path, recording)
        except (io.DataError, ValueError, OSError) as exc:
            exclusions.append(Exclusion(entry.participant_id, "markers", str(exc)))
            continue
        loaded[entry.participant_id] = (recording, markers)
    matrix, stage_exclusions = feature_matrix_from_recordings(
        loaded, band_set=band_set, montage=montage, **pipeline_kwargs
    )
    exclusions.extend(stage_exclusions)
    return matrix, exclusions
