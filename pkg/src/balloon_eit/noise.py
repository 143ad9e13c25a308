"""Additive measurement noise and detection thresholds.

Noise is zero-mean Gaussian with standard deviation set by the SNR in dB:
std = reference_amplitude * 10^(-snr_db/20).  The reference amplitude
convention is selectable because instrument specifications differ:

* per-measurement -- each measurement is perturbed relative to its own
  magnitude (default); the scalar detection threshold then uses the mean
  absolute amplitude of the frame.
* frame-rms       -- one noise level from the RMS of the frame.
* frame-max       -- one noise level from the largest magnitude in the frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .fem import Frame

REFERENCE_MODES = ("per-measurement", "frame-rms", "frame-max")


@dataclass(frozen=True)
class NoiseModel:
    snr_db: float = 60.0
    seed: int = 0
    reference: str = "per-measurement"

    def __post_init__(self):
        if self.snr_db <= 0:
            raise ParameterError("snr_db must be positive")
        if self.reference not in REFERENCE_MODES:
            raise ParameterError(f"reference must be one of {REFERENCE_MODES}")

    @property
    def amplitude_factor(self) -> float:
        return 10.0 ** (-self.snr_db / 20.0)

    def noise_std(self, voltages: np.ndarray) -> np.ndarray:
        """Per-measurement noise standard deviation for a voltage vector."""
        v = np.asarray(voltages, dtype=float)
        if self.reference == "per-measurement":
            return np.abs(v) * self.amplitude_factor
        if self.reference == "frame-rms":
            level = float(np.sqrt(np.mean(v ** 2)))
        else:
            level = float(np.max(np.abs(v)))
        return np.full(v.shape, level * self.amplitude_factor)

    def reference_amplitude(self, voltages: np.ndarray) -> float:
        """Scalar frame amplitude under this model's convention."""
        v = np.asarray(voltages, dtype=float)
        if self.reference == "per-measurement":
            return float(np.mean(np.abs(v)))
        if self.reference == "frame-rms":
            return float(np.sqrt(np.mean(v ** 2)))
        return float(np.max(np.abs(v)))


def add_noise(frame: Frame, model: NoiseModel, stream: int = 0) -> Frame:
    """Additive Gaussian noise at the model's SNR; deterministic per seed.

    `stream` separates substreams (e.g. sweep cases) under one seed.
    """
    if len(frame) == 0:
        raise ParameterError("frame is empty")
    rng = np.random.default_rng([int(model.seed), int(stream)])
    std = model.noise_std(frame.voltages)
    noisy = frame.voltages + std * rng.standard_normal(len(frame))
    return frame.copy_with(noisy, noise_snr_db=model.snr_db,
                           noise_seed=model.seed, noise_stream=stream,
                           noise_reference=model.reference)


def detection_threshold(frame: Frame, model: NoiseModel,
                        safety_factor: float = 10.0) -> float:
    """Minimum detectable signal: `safety_factor` times the expected noise."""
    if len(frame) == 0:
        raise ParameterError("frame is empty")
    return safety_factor * model.amplitude_factor * model.reference_amplitude(frame.voltages)
