"""Signal path: zero-phase bandpass filtering, phase segmentation and spectral power.

The spectral estimator is Welch's method with Hann-tapered segments. The
normalization is chosen so that the integral of the one-sided density over
frequency equals the mean square value of the signal (discrete Parseval),
which is what the synthetic-signal oracle checks against closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .core import BandSet, Phase, PhaseMarkers, Recording


@dataclass(frozen=True, eq=False)
class FilterSpec:
    """Butterworth bandpass in second-order sections, applied forward-backward.

    The stored design order is the one-pass order; the zero-phase application
    doubles the effective order and cancels the group delay.
    """

    low_hz: float
    high_hz: float
    order: int
    sample_rate_hz: float
    sos: np.ndarray
    kind: str = "bandpass"
    design: str = "butterworth-zero-phase"


def design_bandpass(
    low_hz: float, high_hz: float, sample_rate_hz: float, order: int = 4
) -> FilterSpec:
    """Design a stable Butterworth bandpass.

    Parameters
    ----------
    low_hz, high_hz : passband edges, 0 < low < high < sample_rate/2
    order : one-pass design order, even and >= 2

    Raises ValueError for infeasible edges or an unstable result.
    """
    nyquist = sample_rate_hz / 2.0
    if low_hz <= 0:
        raise ValueError(f"low edge must be > 0, got {low_hz:g}")
    if low_hz >= high_hz:
        raise ValueError(f"low >= high: {low_hz:g} >= {high_hz:g}")
    if high_hz >= nyquist:
        raise ValueError(f"edge >= Nyquist: {high_hz:g} >= {nyquist:g}")
    if order < 2 or order % 2 != 0:
        raise ValueError(f"order must be even and >= 2, got {order}")
    sos = sps.butter(order, [low_hz, high_hz], btype="bandpass", fs=sample_rate_hz, output="sos")
    _, poles, _ = sps.sos2zpk(sos)
    if np.any(np.abs(poles) >= 1.0):
        raise ValueError("unstable design: poles on or outside the unit circle")
    return FilterSpec(low_hz, high_hz, order, sample_rate_hz, sos)


def filter_gain(spec: FilterSpec, freq_hz: float) -> float:
    """One-pass magnitude response at freq_hz, evaluated directly from the sections."""
    z = np.exp(-2j * np.pi * freq_hz / spec.sample_rate_hz)
    h = 1.0 + 0.0j
    for b0, b1, b2, a0, a1, a2 in spec.sos:
        h *= (b0 + b1 * z + b2 * z * z) / (a0 + a1 * z + a2 * z * z)
    return float(np.abs(h))


def apply_filter(recording: Recording, spec: FilterSpec) -> Recording:
    """Zero-phase application: forward pass then reversed pass.

    Edges are reflect-padded with 3x the design order of samples before
    filtering, then trimmed, so results are reproducible bit for bit.
    """
    if recording.sample_rate_hz != spec.sample_rate_hz:
        raise ValueError(
            f"filter designed for {spec.sample_rate_hz:g} Hz but recording is "
            f"{recording.sample_rate_hz:g} Hz"
        )
    padlen = min(3 * spec.order, recording.n_samples - 1)
    filtered = sps.sosfiltfilt(spec.sos, recording.data, axis=1, padtype="even", padlen=padlen)
    return Recording(
        sample_rate_hz=recording.sample_rate_hz,
        channels=recording.channels,
        data=filtered,
        participant_id=recording.participant_id,
    )


def segment(recording: Recording, markers: PhaseMarkers) -> dict[Phase, Recording]:
    """Cut the recording into the three phase spans.

    Samples outside the spans (for example a familiarization prefix) appear in
    no segment.
    """
    markers.validate_within(recording)
    out: dict[Phase, Recording] = {}
    for phase, (start, end) in markers.spans.items():
        out[phase] = Recording(
            sample_rate_hz=recording.sample_rate_hz,
            channels=recording.channels,
            data=recording.data[:, start:end],
            participant_id=recording.participant_id,
        )
    return out


@dataclass(frozen=True, eq=False)
class Psd:
    """One-sided power spectral density per channel, in uV^2/Hz.

    freqs_hz spans [0, sample_rate/2] with spacing sample_rate/segment_len.
    """

    freqs_hz: np.ndarray
    power: np.ndarray  # (n_channels, n_bins)
    channels: tuple[str, ...]
    sample_rate_hz: float
    segment_len: int
    overlap: float
    n_segments: int
    taper: str = "hann"

    @property
    def df(self) -> float:
        return self.sample_rate_hz / self.segment_len

    def total_power_uv2(self) -> np.ndarray:
        """Integral of the density over frequency, per channel (mean square value)."""
        return self.power.sum(axis=1) * self.df


def _hann(n: int) -> np.ndarray:
    # periodic Hann, matching FFT-length windows
    k = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)


def hann_periodogram(block: np.ndarray, sample_rate_hz: float) -> np.ndarray:
    """One-sided Hann-tapered periodogram of a (n_channels, n) block.

    Scaled as density: sum(psd) * df equals the Hann-weighted mean square of
    the block. This is the single building block shared by the batch Welch
    estimator and the streaming estimator, so the two paths agree bitwise on
    identical windows.
    """
    block = np.asarray(block, dtype=np.float64)
    n = block.shape[1]
    w = _hann(n)
    u = float(np.sum(w * w))
    spec = np.fft.rfft(block * w, axis=1)
    psd = (spec.real**2 + spec.imag**2) / (sample_rate_hz * u)
    psd[:, 1:] *= 2.0
    if n % 2 == 0:
        psd[:, -1] *= 0.5  # Nyquist bin is not mirrored
    return psd


def welch_psd(recording: Recording, segment_len: int = 512, overlap: float = 0.5) -> Psd:
    """Welch estimate: averaged Hann periodograms over overlapping segments.

    Parameters
    ----------
    segment_len : samples per segment, a power of two and <= n_samples
    overlap : fractional overlap between consecutive segments, in [0, 1)
    """
    n = recording.n_samples
    if segment_len < 2 or (segment_len & (segment_len - 1)) != 0:
        raise ValueError(f"segment_len must be a power of two, got {segment_len}")
    if segment_len > n:
        raise ValueError(f"segment of {segment_len} samples is longer than the data ({n})")
    if not (0.0 <= overlap < 1.0):
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    noverlap = int(round(overlap * segment_len))
    step = segment_len - noverlap
    if step < 1:
        raise ValueError("overlap leaves no forward step")
    starts = range(0, n - segment_len + 1, step)
    acc = np.zeros((recording.n_channels, segment_len // 2 + 1))
    count = 0
    for s in starts:
        acc += hann_periodogram(recording.data[:, s : s + segment_len], recording.sample_rate_hz)
        count += 1
    acc /= float(count)
    freqs = np.fft.rfftfreq(segment_len, d=1.0 / recording.sample_rate_hz)
    return Psd(
        freqs_hz=freqs,
        power=acc,
        channels=recording.channels,
        sample_rate_hz=recording.sample_rate_hz,
        segment_len=segment_len,
        overlap=overlap,
        n_segments=count,
    )


def largest_pow2_at_most(n: int) -> int:
    if n < 2:
        raise ValueError("need at least 2 samples")
    return 1 << (n.bit_length() - 1)


def band_power(psd: Psd, bands: BandSet) -> dict[tuple[str, str], float]:
    """Mean density per (channel, band) over the bins inside each band.

    A band with no qualifying bin is an error: the frequency resolution is too
    coarse for that band set.
    """
    indices = bands.bin_indices(psd.freqs_hz)
    out: dict[tuple[str, str], float] = {}
    for name, idx in indices.items():
        if idx.size == 0:
            raise ValueError(
                f"empty band {name}: no PSD bin falls inside it at df={psd.df:g} Hz"
            )
        means = psd.power[:, idx].mean(axis=1)
        for ch, value in zip(psd.channels, means):
            out[(ch, name)] = float(value)
    return out
