"""Synthetic recordings and cohorts with analytically known spectral content.

The signal model is deliberately simple: sinusoidal tones plus white Gaussian
noise. A tone of amplitude A contributes A^2/2 of integrated power to the
band containing its frequency; noise of standard deviation sigma spreads
sigma^2 evenly over [0, Nyquist]. Those closed forms make the generated data
an exact oracle for the whole estimation pipeline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import (
    PHASE_ORDER,
    BandSet,
    Montage,
    Phase,
    PhaseMarkers,
    Recording,
    Region,
    default_bands,
    default_montage,
)
from .teq import MAX_TOTAL, TeqResponse, default_reverse_items, response_for_total


@dataclass(frozen=True)
class Tone:
    freq_hz: float
    amplitude_uv: float
    phase_rad: float = 0.0

    def __post_init__(self) -> None:
        if self.amplitude_uv < 0:
            raise ValueError("tone amplitude must be >= 0")


@dataclass(frozen=True)
class ChannelSignal:
    tones: tuple[Tone, ...] = ()
    noise_sd_uv: float = 0.0


@dataclass(frozen=True)
class SignalSpec:
    """Per-channel tones and noise for one deterministic synthetic recording."""

    sample_rate_hz: float
    duration_s: float
    channels: dict[str, ChannelSignal]
    seed: int = 0
    participant_id: str = "synthetic"

    def __post_init__(self) -> None:
        nyquist = self.sample_rate_hz / 2.0
        for label, chan in self.channels.items():
            for tone in chan.tones:
                if tone.freq_hz >= nyquist:
                    raise ValueError(
                        f"channel {label}: tone at {tone.freq_hz:g} Hz is at or above "
                        f"Nyquist ({nyquist:g} Hz)"
                    )


@dataclass(frozen=True)
class SignalGroundTruth:
    """Closed-form integrated band power (uV^2) per (channel, band)."""

    band_integrals_uv2: dict[tuple[str, str], float]

    def expected_mean_density(
        self, channel: str, band: str, n_bins: int, df: float
    ) -> float:
        """Convert the band integral to the mean density the pipeline reports."""
        return self.band_integrals_uv2[(channel, band)] / (n_bins * df)


def _band_of(freq: float, band_set: BandSet) -> str | None:
    last = band_set.bands[-1]
    for b in band_set.bands:
        if b is last:
            if b.low_hz <= freq <= b.high_hz:
                return b.name
        elif b.low_hz <= freq < b.high_hz:
            return b.name
    return None


def _ground_truth(
    spec: SignalSpec, band_set: BandSet, channel_order: tuple[str, ...]
) -> SignalGroundTruth:
    nyquist = spec.sample_rate_hz / 2.0
    integrals: dict[tuple[str, str], float] = {}
    for label in channel_order:
        chan = spec.channels[label]
        for band in band_set.bands:
            total = chan.noise_sd_uv**2 * (band.high_hz - band.low_hz) / nyquist
            integrals[(label, band.name)] = total
        for tone in chan.tones:
            name = _band_of(tone.freq_hz, band_set)
            if name is not None:
                integrals[(label, name)] += tone.amplitude_uv**2 / 2.0
    return SignalGroundTruth(integrals)


def generate_recording(
    spec: SignalSpec, band_set: BandSet | None = None
) -> tuple[Recording, SignalGroundTruth]:
    """Render the spec to samples. Identical seeds give identical recordings."""
    band_set = band_set if band_set is not None else default_bands()
    n = int(round(spec.duration_s * spec.sample_rate_hz))
    if n < 1:
        raise ValueError("duration too short for one sample")
    t = np.arange(n) / spec.sample_rate_hz
    rng = np.random.default_rng(spec.seed)
    channel_order = tuple(spec.channels.keys())
    data = np.zeros((len(channel_order), n))
    for i, label in enumerate(channel_order):
        chan = spec.channels[label]
        row = np.zeros(n)
        for tone in chan.tones:
            row += tone.amplitude_uv * np.sin(
                2.0 * np.pi * tone.freq_hz * t + tone.phase_rad
            )
        if chan.noise_sd_uv > 0:
            row += rng.normal(0.0, chan.noise_sd_uv, size=n)
        data[i] = row
    recording = Recording(
        sample_rate_hz=spec.sample_rate_hz,
        channels=channel_order,
        data=data,
        participant_id=spec.participant_id,
    )
    return recording, _ground_truth(spec, band_set, channel_order)


# ---------------------------------------------------------------------------
# cohort generation


DEFAULT_BAND_CARRIER_HZ: dict[str, float] = {
    "Delta": 2.0,
    "Theta": 6.0,
    "Alpha": 10.0,
    "Beta": 20.0,
    "Gamma": 39.0,
}


def _default_targets() -> dict[tuple[Phase, Region, str], float]:
    # positive baseline asymmetry flipping negative during the stimulus phase
    return {
        (Phase.PRE_B, Region.FRONTAL, "Alpha"): 2.0,
        (Phase.VRX, Region.FRONTAL, "Alpha"): -2.0,
        (Phase.POST_B, Region.FRONTAL, "Alpha"): 2.0,
    }


@dataclass(frozen=True)
class CohortSpec:
    """Recipe for a cohort with planted asymmetry and empathy structure.

    Asymmetry targets are mean-density values (uV^2/Hz) per (phase, region,
    band); each one is realized by biasing the right/left tone amplitudes of
    that region pair. The empathy link ties the PreB frontal-alpha asymmetry
    of each participant to their drawn empathy score:

        asym = target + link_slope * (empathy - empathy_mean) + noise

    so a negative slope plants the "higher empathy, more negative baseline
    asymmetry" relationship. Identical seeds reproduce the cohort exactly.
    """

    n_participants: int = 40
    sample_rate_hz: float = 256.0
    phase_duration_s: tuple[float, float, float] = (180.0, 266.0, 180.0)
    familiarization_s: float = 0.0
    carrier_amplitude_uv: float = 8.0
    noise_sd_uv: float = 2.0
    band_carrier_hz: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_BAND_CARRIER_HZ)
    )
    asym_targets: dict[tuple[Phase, Region, str], float] = field(
        default_factory=_default_targets
    )
    between_participant_sd: float = 0.8
    empathy_mean: float = 67.0
    empathy_sd: float = 8.0
    empathy_min: int = 49
    empathy_max: int = 86
    link_slope: float = -0.10
    link_noise_sd: float = 0.3
    welch_segment_len: int = 512
    band_set: BandSet = field(default_factory=default_bands)
    montage: Montage = field(default_factory=default_montage)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_participants < 3:
            raise ValueError("need at least 3 participants")
        if not (0 <= self.empathy_min <= self.empathy_max <= MAX_TOTAL):
            raise ValueError(
                f"score outside [0, {MAX_TOTAL}]: empathy range "
                f"[{self.empathy_min}, {self.empathy_max}]"
            )
        if not (self.empathy_min <= self.empathy_mean <= self.empathy_max):
            raise ValueError(
                f"score outside [0, {MAX_TOTAL}]: empathy mean {self.empathy_mean:g} "
                f"is outside [{self.empathy_min}, {self.empathy_max}]"
            )
        for duration in self.phase_duration_s:
            if duration * self.sample_rate_hz < self.welch_segment_len:
                raise ValueError(
                    f"phase of {duration:g} s is shorter than one Welch segment"
                )


@dataclass(frozen=True)
class ParticipantData:
    participant_id: str
    recording: Recording
    markers: PhaseMarkers
    teq_response: TeqResponse
    empathy_total: int


@dataclass(frozen=True)
class CohortGroundTruth:
    """What was planted: per-cell asymmetry densities, empathy totals, the link."""

    planted_asym: dict[tuple[str, Phase, Region, str], float]
    empathy_totals: dict[str, int]
    link_slope: float
    link_noise_sd: float
    seed: int

    def to_jsonable(self) -> dict:
        return {
            "planted_asym": [
                {
                    "participant": pid,
                    "phase": phase.value,
                    "region": region.value,
                    "band": band,
                    "asym": value,
                }
                for (pid, phase, region, band), value in self.planted_asym.items()
            ],
            "empathy_totals": dict(self.empathy_totals),
            "link_slope": self.link_slope,
            "link_noise_sd": self.link_noise_sd,
            "seed": self.seed,
        }


def _band_bin_width(band_name: str, spec: CohortSpec) -> float:
    """Exact frequency mass of the bins the estimator averages for this band."""
    df = spec.sample_rate_hz / spec.welch_segment_len
    freqs = np.fft.rfftfreq(spec.welch_segment_len, d=1.0 / spec.sample_rate_hz)
    idx = spec.band_set.bin_indices(freqs)[band_name]
    if idx.size == 0:
        raise ValueError(f"band {band_name} has no bins at df={df:g}")
    return idx.size * df


def _draw_empathy(rng: np.random.Generator, spec: CohortSpec) -> int:
    for _ in range(10_000):
        value = rng.normal(spec.empathy_mean, spec.empathy_sd)
        if spec.empathy_min <= value <= spec.empathy_max:
            return int(round(value))
    raise RuntimeError("empathy sampling failed to hit the configured range")


def _pair_amplitudes(
    base_amplitude: float, asym_density: float, bin_width_hz: float
) -> tuple[float, float]:
    """Left/right tone amplitudes realizing a mean-density asymmetry.

    Solves (A_r^2 - A_l^2)/2 = asym * bin_width with the pair mean power held
    at the carrier level.
    """
    delta = asym_density * bin_width_hz  # each side moves by half the difference
    left_sq = base_amplitude**2 - delta
    right_sq = base_amplitude**2 + delta
    if left_sq < 0 or right_sq < 0:
        raise ValueError(
            f"amplitude infeasible: asymmetry {asym_density:g} uV^2/Hz exceeds what a "
            f"{base_amplitude:g} uV carrier can carry"
        )
    return math.sqrt(left_sq), math.sqrt(right_sq)


def generate_cohort_data(spec: CohortSpec) -> tuple[list[ParticipantData], CohortGroundTruth]:
    """Generate the cohort in memory.

    Each participant gets a three-phase recording (tones plus noise, with the
    planted per-phase asymmetries), phase markers and a questionnaire response
    that scores exactly to the drawn empathy total.
    """
    master = np.random.SeedSequence(spec.seed)
    children = master.spawn(spec.n_participants)
    reverse_items = default_reverse_items()
    montage = spec.montage
    band_set = spec.band_set
    participants: list[ParticipantData] = []
    planted: dict[tuple[str, Phase, Region, str], float] = {}
    empathy_totals: dict[str, int] = {}

    fam_samples = int(round(spec.familiarization_s * spec.sample_rate_hz))
    phase_samples = [
        int(round(d * spec.sample_rate_hz)) for d in spec.phase_duration_s
    ]
    spans: dict[Phase, tuple[int, int]] = {}
    cursor = fam_samples
    for phase, n in zip(PHASE_ORDER, phase_samples):
        spans[phase] = (cursor, cursor + n)
        cursor += n
    markers = PhaseMarkers(spans)

    carrier_bands = sorted(
        {"Alpha"} | {band for (_, _, band) in spec.asym_targets}
    )
    width = math.floor(math.log10(max(spec.n_participants, 1))) + 1

    for index in range(spec.n_participants):
        rng = np.random.default_rng(children[index])
        pid = f"p{index + 1:0{width}d}"
        empathy = _draw_empathy(rng, spec)
        empathy_totals[pid] = empathy

        # realized (post-jitter) asymmetry density per targeted cell
        cell_asym: dict[tuple[Phase, Region, str], float] = {}
        for (phase, region, band), target in spec.asym_targets.items():
            if (phase, region, band) == (Phase.PRE_B, Region.FRONTAL, "Alpha"):
                value = (
                    target
                    + spec.link_slope * (empathy - spec.empathy_mean)
                    + rng.normal(0.0, spec.link_noise_sd)
                )
            else:
                value = target + rng.normal(0.0, spec.between_participant_sd)
            cell_asym[(phase, region, band)] = value
            planted[(pid, phase, region, band)] = value

        blocks: list[np.ndarray] = []
        if fam_samples > 0:
            blocks.append(
                _render_block(
                    rng, montage, spec, fam_samples, carrier_bands, amplitudes={}
                )
            )
        for phase, n in zip(PHASE_ORDER, phase_samples):
            amplitudes: dict[tuple[str, str], float] = {}
            for band in carrier_bands:
                bin_width = _band_bin_width(band, spec)
                for region, (left, right) in montage.region_pairs.items():
                    asym = cell_asym.get((phase, region, band), 0.0)
                    a_left, a_right = _pair_amplitudes(
                        spec.carrier_amplitude_uv, asym, bin_width
                    )
                    amplitudes[(left, band)] = a_left
                    amplitudes[(right, band)] = a_right
            blocks.append(
                _render_block(rng, montage, spec, n, carrier_bands, amplitudes)
            )
        data = np.concatenate(blocks, axis=1)
        recording = Recording(
            sample_rate_hz=spec.sample_rate_hz,
            channels=montage.channels,
            data=data,
            participant_id=pid,
        )
        response = response_for_total(pid, empathy, reverse_items)
        participants.append(
            ParticipantData(pid, recording, markers, response, empathy)
        )

    truth = CohortGroundTruth(
        planted_asym=planted,
        empathy_totals=empathy_totals,
        link_slope=spec.link_slope,
        link_noise_sd=spec.link_noise_sd,
        seed=spec.seed,
    )
    return participants, truth


def _render_block(
    rng: np.random.Generator,
    montage: Montage,
    spec: CohortSpec,
    n_samples: int,
    carrier_bands: list[str],
    amplitudes: dict[tuple[str, str], float],
) -> np.ndarray:
    """One contiguous stretch of samples with per-channel carrier amplitudes.

    Channels without an explicit amplitude (midlines, or every channel in the
    familiarization block) get the plain carrier level. Tone phases are drawn
    per channel and band so channels stay mutually independent.
    """
    t = np.arange(n_samples) / spec.sample_rate_hz
    data = np.zeros((len(montage.channels), n_samples))
    for i, label in enumerate(montage.channels):
        row = np.zeros(n_samples)
        for band in carrier_bands:
            amp = amplitudes.get((label, band), spec.carrier_amplitude_uv)
            phase_rad = rng.uniform(0.0, 2.0 * np.pi)
            row += amp * np.sin(
                2.0 * np.pi * spec.band_carrier_hz[band] * t + phase_rad
            )
        if spec.noise_sd_uv > 0:
            row += rng.normal(0.0, spec.noise_sd_uv, size=n_samples)
        data[i] = row
    return data


def generate_cohort(spec: CohortSpec, out_dir: str | Path):
    """Write a cohort to disk: recordings, markers, questionnaire, manifest, truth.

    Returns the loaded DatasetManifest and the ground truth. File contents are
    byte-identical across runs with the same spec and seed.
    """
    from . import io  # local import to keep the module graph acyclic

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    participants, truth = generate_cohort_data(spec)
    entries = []
    teq_path = out_dir / "teq.csv"
    io.write_teq([p.teq_response for p in participants], teq_path)
    for part in participants:
        rec_path = out_dir / f"{part.participant_id}_recording.csv"
        mark_path = out_dir / f"{part.participant_id}_markers.csv"
        io.write_recording(part.recording, rec_path)
        io.write_markers(part.markers, mark_path)
        entries.append(
            io.ManifestEntry(
                participant_id=part.participant_id,
                recording_path=rec_path,
                markers_path=mark_path,
                teq_path=teq_path,
            )
        )
    manifest = io.DatasetManifest(entries=tuple(entries))
    manifest_path = out_dir / "manifest.json"
    io.write_manifest(manifest, manifest_path)
    truth_path = out_dir / "ground_truth.json"
    truth_path.write_text(
        json.dumps(truth.to_jsonable(), indent=2) + "\n", encoding="utf-8"
    )
    return io.load_manifest(manifest_path), truth
