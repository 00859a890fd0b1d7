"""Online sliding-window asymmetry estimation from an unbounded sample feed.

Each completed hop emits the raw right-minus-left band power of the trailing
window (one Hann periodogram, the same code path as the batch estimator in
single-window mode, so the two agree bitwise) plus an exponentially smoothed
value. State is bounded by the window length regardless of stream duration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BandSet, Montage, Region, default_bands, default_montage
from .dsp import Psd, band_power, hann_periodogram


@dataclass(frozen=True)
class StreamConfig:
    sample_rate_hz: float = 256.0
    window_s: float = 2.0
    hop_s: float = 0.5
    smoothing_halflife_hops: float = 4.0
    band_set: BandSet = field(default_factory=default_bands)
    montage: Montage = field(default_factory=default_montage)
    regions: tuple[Region, ...] | None = None  # None means every montage region

    def __post_init__(self) -> None:
        if self.hop_s <= 0 or self.window_s <= 0:
            raise ValueError("window_s and hop_s must be positive")
        if self.hop_s > self.window_s:
            raise ValueError("hop_s must not exceed window_s")
        if self.smoothing_halflife_hops <= 0:
            raise ValueError("smoothing half-life must be positive")
        if self.window_len < 2:
            raise ValueError("window is shorter than 2 samples")
        if self.hop_len < 1:
            raise ValueError("hop is shorter than 1 sample")

    @property
    def window_len(self) -> int:
        return int(round(self.window_s * self.sample_rate_hz))

    @property
    def hop_len(self) -> int:
        return int(round(self.hop_s * self.sample_rate_hz))

    @property
    def alpha(self) -> float:
        """Smoothing weight: (1 - alpha)^halflife = 1/2."""
        return 1.0 - 0.5 ** (1.0 / self.smoothing_halflife_hops)

    @property
    def active_regions(self) -> tuple[Region, ...]:
        if self.regions is not None:
            return self.regions
        return tuple(self.montage.region_pairs.keys())


@dataclass(frozen=True)
class AsymmetrySample:
    """One emission: window-end timestamp plus raw and smoothed asymmetries."""

    timestamp_s: float
    raw: dict[tuple[Region, str], float]
    smoothed: dict[tuple[Region, str], float]

    def to_jsonable(self) -> dict:
        def nest(values: dict[tuple[Region, str], float]) -> dict:
            out: dict[str, dict[str, float]] = {}
            for (region, band), v in values.items():
                out.setdefault(region.value, {})[band] = v
            return out

        return {
            "timestamp_s": self.timestamp_s,
            "raw": nest(self.raw),
            "smoothed": nest(self.smoothed),
        }


class AsymmetryStream:
    """Single-writer sliding-window estimator fed by push().

    Frames are (n_channels, k) arrays in montage channel order. Emissions are
    immutable values; the emission for the window ending at sample s happens
    during the push that delivers sample s.
    """

    def __init__(self, config: StreamConfig):
        self.config = config
        n_ch = len(config.montage.channels)
        if config.window_len & (config.window_len - 1) != 0:
            # pad the FFT length so the spectral path stays power-of-two
            self._nfft = 1 << config.window_len.bit_length()
        else:
            self._nfft = config.window_len
        self._buffer = np.zeros((n_ch, config.window_len))
        self._filled = 0  # valid samples at the right edge of the buffer
        self._total = 0  # samples consumed since the last reset
        self._next_emit = config.window_len  # total-count at the next window end
        self._smoothed: dict[tuple[Region, str], float] | None = None

    def reset(self) -> None:
        """Clear buffered samples and smoother state.

        The next emission happens only after a full window accumulates again;
        nothing from before the reset can influence later output.
        """
        self._buffer[:] = 0.0
        self._filled = 0
        self._total = 0
        self._next_emit = self.config.window_len
        self._smoothed = None

    def push(self, frame: np.ndarray) -> list[AsymmetrySample]:
        """Feed k samples per channel; return the emissions they complete.

        A frame with the wrong channel count or any non-finite value is
        rejected with the stream state unchanged.
        """
        frame = np.asarray(frame, dtype=np.float64)
        if frame.ndim == 1:
            frame = frame[:, np.newaxis]
        n_ch = len(self.config.montage.channels)
        if frame.ndim != 2 or frame.shape[0] != n_ch:
            raise ValueError(
                f"frame must have {n_ch} channel rows, got shape {frame.shape}"
            )
        if not np.all(np.isfinite(frame)):
            raise ValueError("frame contains non-finite samples; frame rejected")

        emissions: list[AsymmetrySample] = []
        window_len = self.config.window_len
        offset = 0
        k = frame.shape[1]
        while offset < k:
            take = min(k - offset, self._next_emit - self._total)
            self._append(frame[:, offset : offset + take])
            offset += take
            self._total += take
            if self._total == self._next_emit:
                emissions.append(self._emit())
                self._next_emit += self.config.hop_len
        return emissions

    def _append(self, chunk: np.ndarray) -> None:
        window_len = self.config.window_len
        k = chunk.shape[1]
        if k >= window_len:
            self._buffer[:, :] = chunk[:, k - window_len :]
            self._filled = window_len
            return
        self._buffer[:, : window_len - k] = self._buffer[:, k:]
        self._buffer[:, window_len - k :] = chunk
        self._filled = min(window_len, self._filled + k)

    def _window_psd(self) -> Psd:
        cfg = self.config
        window = self._buffer
        if self._nfft != cfg.window_len:
            padded = np.zeros((window.shape[0], self._nfft))
            padded[:, : cfg.window_len] = window
            window = padded
        power = hann_periodogram_padded(
            self._buffer, cfg.sample_rate_hz, self._nfft
        )
        freqs = np.fft.rfftfreq(self._nfft, d=1.0 / cfg.sample_rate_hz)
        return Psd(
            freqs_hz=freqs,
            power=power,
            channels=cfg.montage.channels,
            sample_rate_hz=cfg.sample_rate_hz,
            segment_len=self._nfft,
            overlap=0.0,
            n_segments=1,
        )

    def _emit(self) -> AsymmetrySample:
        cfg = self.config
        psd = self._window_psd()
        powers = band_power(psd, cfg.band_set)
        raw: dict[tuple[Region, str], float] = {}
        for region in cfg.active_regions:
            left, right = cfg.montage.pair(region)
            for band in cfg.band_set.names:
                raw[(region, band)] = powers[(right, band)] - powers[(left, band)]
        if self._smoothed is None:
            smoothed = dict(raw)
        else:
            a = cfg.alpha
            smoothed = {
                key: a * raw[key] + (1.0 - a) * self._smoothed[key] for key in raw
            }
        self._smoothed = smoothed
        return AsymmetrySample(
            timestamp_s=self._total / cfg.sample_rate_hz,
            raw=raw,
            smoothed=dict(smoothed),
        )


def hann_periodogram_padded(
    block: np.ndarray, sample_rate_hz: float, nfft: int
) -> np.ndarray:
    """Hann periodogram, zero-padding the FFT when nfft exceeds the block length."""
    if nfft == block.shape[1]:
        return hann_periodogram(block, sample_rate_hz)
    n = block.shape[1]
    k = np.arange(n)
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)
    u = float(np.sum(w * w))
    padded = np.zeros((block.shape[0], nfft))
    padded[:, :n] = block * w
    spec = np.fft.rfft(padded, axis=1)
    psd = (spec.real**2 + spec.imag**2) / (sample_rate_hz * u)
    psd[:, 1:] *= 2.0
    if nfft % 2 == 0:
        psd[:, -1] *= 0.5
    # padding oversamples the spectrum; rescale so the density integral is kept
    psd *= n / float(nfft)
    return psd
