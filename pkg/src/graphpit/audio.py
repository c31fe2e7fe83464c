"""Waveforms, the epsilon-thresholded SDR loss and plain SDR metrics.

All arithmetic is done in float64. Functions accept either a
:class:`Waveform` or anything ``np.asarray`` understands; sample rates are
only compared when both operands carry one.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, UndefinedMetricError

#: Value reported by :func:`sdr` when the estimate matches the reference exactly.
SDR_CAP = 300.0


@dataclass(frozen=True)
class Waveform:
    """A mono signal with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = self.samples
        # A read-only float64 array that owns its memory can be shared as is.
        if not (isinstance(samples, np.ndarray) and samples.dtype == np.float64
                and samples.base is None and not samples.flags.writeable):
            samples = np.array(samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ContractError(f"waveform must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ContractError("waveform contains NaN or Inf")
        if self.sample_rate <= 0:
            raise ContractError(f"sample_rate must be positive, got {self.sample_rate}")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class TsdrParams:
    """Soft SDR threshold (dB) and silence constant of the eps-tSDR loss."""

    sdr_max: float = 20.0
    epsilon: float = 1e-6
    tau: float = field(init=False)

    def __post_init__(self):
        if not np.isfinite(self.sdr_max):
            raise ContractError("sdr_max must be finite")
        if not self.epsilon > 0:
            raise ContractError("epsilon must be positive")
        object.__setattr__(self, "tau", 10 ** (-self.sdr_max / 10))


def _as_array(x):
    return np.asarray(getattr(x, "samples", x), dtype=np.float64)


def _pair(reference, estimate):
    s = _as_array(reference)
    s_hat = _as_array(estimate)
    if s.shape != s_hat.shape:
        raise ContractError(
            f"reference and estimate differ in shape: {s.shape} vs {s_hat.shape}")
    rate_ref = getattr(reference, "sample_rate", None)
    rate_est = getattr(estimate, "sample_rate", None)
    if rate_ref is not None and rate_est is not None and rate_ref != rate_est:
        raise ContractError(f"sample rates differ: {rate_ref} vs {rate_est}")
    return s, s_hat


def eps_tsdr_loss(reference, estimate, params=TsdrParams()):
    """Negated thresholded SDR with an additive epsilon for silent references.

    ``-10 log10((|s|^2 + eps) / (|s - s_hat|^2 + tau (|s|^2 + eps)))``, which
    never drops below ``-params.sdr_max``.
    """
    s, s_hat = _pair(reference, estimate)
    target_energy = np.dot(s, s) + params.epsilon
    error = s - s_hat
    error_energy = np.dot(error, error)
    # Same value as the textbook form; written so that a perfect estimate
    # evaluates to 10 log10(tau) without a division round-off.
    return float(10 * np.log10(error_energy / target_energy + params.tau))


def sdr(reference, estimate):
    """Plain energy-ratio SDR in dB, capped at :data:`SDR_CAP`."""
    s, s_hat = _pair(reference, estimate)
    target_energy = np.dot(s, s)
    if target_energy == 0:
        raise UndefinedMetricError("SDR is undefined for an all-zero reference")
    error = s - s_hat
    error_energy = np.dot(error, error)
    if error_energy == 0:
        return SDR_CAP
    return float(min(10 * np.log10(target_energy / error_energy), SDR_CAP))


def neg_sdr_loss(reference, estimate):
    """Negated :func:`sdr`, usable as a base loss. Undefined for silent references."""
    return -sdr(reference, estimate)


def sdr_improvement(reference, unprocessed, estimate):
    """SDR gain of ``estimate`` over ``unprocessed`` w.r.t. ``reference``."""
    if np.shape(_as_array(unprocessed)) != np.shape(_as_array(estimate)):
        raise ContractError("unprocessed and estimate differ in length")
    return sdr(reference, estimate) - sdr(reference, unprocessed)


def white_noise(signal, snr_db, rng, active_only=False):
    """Gaussian noise scaled to exactly ``snr_db`` below ``signal``.

    The draw is rescaled by its realized power, so the SNR is exact up to
    float rounding and depends only on the state of ``rng``.

    With ``active_only`` the signal power is the mean square over its
    nonzero samples and the noise power the mean square over all samples
    (a speech-level SNR for signals containing silence). Otherwise both are
    plain energies over the whole signal.
    """
    x = _as_array(signal)
    if active_only:
        active = x[x != 0]
        if not len(active):
            raise ContractError("cannot set an SNR on an all-zero signal")
        signal_power = np.dot(active, active) / len(active)
    else:
        signal_power = np.dot(x, x) / max(x.size, 1)
        if signal_power == 0:
            raise ContractError("cannot set an SNR on an all-zero signal")
    # Drawn in single precision (faster); scaled and returned as float64.
    noise = rng.standard_normal(x.shape, dtype=np.float32).astype(np.float64)
    noise_power = np.dot(noise, noise) / noise.size
    noise *= np.sqrt(signal_power / (noise_power * 10 ** (snr_db / 10)))
    return noise


def add_white_noise(signal, snr_db, rng, active_only=False):
    """``signal`` plus :func:`white_noise`; returns the same type as ``signal``."""
    noisy = _as_array(signal) + white_noise(signal, snr_db, rng, active_only)
    if isinstance(signal, Waveform):
        return Waveform(noisy, signal.sample_rate)
    return noisy
