"""Deterministic emulation of the measurement hardware.

Covers the superconducting coil (with the relative quantization of the
current source), the four-wire resistive transition of the sample, and
Gaussian instrument noise.  All randomness flows from one master seed
through :func:`noise_stream`, so any curve is reproducible from its
substream path alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfinv

from .errors import DomainError, InputError

#: Converts a 10%-90% resistive width into the erf length scale:
#: R/R_n = (1+erf(x/s))/2 crosses 0.1 and 0.9 at x = -+ s*erfinv(0.8),
#: so s = width / ERF_WIDTH_FACTOR.
ERF_WIDTH_FACTOR = 2.0 * float(erfinv(0.8))

#: Resistance noise (ohm) that reproduces a single-measurement
#: sensitivity of ~0.1 mK with the default plan; frozen from
#: sensitivity.calibrate_noise at the reference configuration.
DEFAULT_RESISTANCE_NOISE = 0.0751


@dataclass(frozen=True)
class InstrumentConfig:
    """Hardware constants and noise levels of the measurement chain."""

    coil_constant: float = 3.0          # gauss per mA
    current_resolution: float = 1e-3    # relative source/readout granularity
    base_temperature: float = 0.300     # K, cryostat floor
    normal_resistance: float = 10.0     # ohm
    transition_width: float = 50.0      # mK, 10%-90% resistive width
    resistance_noise: float = DEFAULT_RESISTANCE_NOISE  # ohm, sigma per sample
    temperature_jitter: float = 0.0     # mK, sigma on the setpoint
    seed: int = 1                       # master seed, 64-bit unsigned

    def __post_init__(self):
        if not (self.coil_constant > 0):
            raise InputError(f"coil_constant must be > 0, got {self.coil_constant}")
        if not (0 < self.current_resolution < 1):
            raise InputError(
                f"current_resolution must be in (0, 1), got {self.current_resolution}")
        if not (self.base_temperature > 0):
            raise InputError(
                f"base_temperature must be > 0, got {self.base_temperature}")
        if not (self.normal_resistance > 0):
            raise InputError(
                f"normal_resistance must be > 0, got {self.normal_resistance}")
        if not (self.transition_width > 0):
            raise InputError(
                f"transition_width must be > 0, got {self.transition_width}")
        if not (self.resistance_noise >= 0):
            raise InputError(
                f"resistance_noise must be >= 0, got {self.resistance_noise}")
        if not (self.temperature_jitter >= 0):
            raise InputError(
                f"temperature_jitter must be >= 0, got {self.temperature_jitter}")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise InputError(f"seed must be a 64-bit unsigned int, got {self.seed}")


@dataclass(frozen=True)
class SampleGeometry:
    """Layer stack and area of one sample; metadata only.

    The back layer exists only for ``kind="cavity"`` and is ignored for
    a bare film.
    """

    al_thickness: float = 10.0          # nm
    oxide_thickness: float = 10.0       # nm
    back_layer_thickness: float = 100.0  # nm
    area: tuple[float, float] = (20.0, 20.0)  # um x um
    kind: str = "film"

    def __post_init__(self):
        if self.kind not in ("film", "cavity"):
            raise InputError(f"kind must be 'film' or 'cavity', got {self.kind!r}")
        if not (self.al_thickness > 0 and self.oxide_thickness > 0):
            raise InputError("layer thicknesses must be > 0")
        if self.kind == "cavity" and not (self.back_layer_thickness > 0):
            raise InputError("cavity back layer thickness must be > 0")
        if not (self.area[0] > 0 and self.area[1] > 0):
            raise InputError("area dimensions must be > 0")


def quantize_current(cfg: InstrumentConfig, current: float) -> float:
    """Round a current (mA) onto the source's relative grid.

    The grid step is ``current_resolution`` times the decade of the
    requested value, so the relative rounding error never exceeds
    ``current_resolution``.
    """
    current = float(current)
    if current < 0:
        raise DomainError(f"current must be >= 0, got {current}")
    if current == 0.0:
        return 0.0
    step = 10.0 ** math.floor(math.log10(current)) * cfg.current_resolution
    return round(current / step) * step


def coil_field(cfg: InstrumentConfig, current: float) -> float:
    """Field (gauss) produced by the coil at a quantized current (mA)."""
    return cfg.coil_constant * quantize_current(cfg, current)


def resistive_transition(t, t_star: float, width_mk: float, r_n: float):
    """Noiseless erf transition shape; t may be a float or an array.

    R(t) = r_n/2 * (1 + erf((t - t_star)/s)) with s sized so the
    resistance climbs from 10% to 90% of r_n over ``width_mk``.
    """
    s = (width_mk * 1e-3) / ERF_WIDTH_FACTOR
    return 0.5 * r_n * (1.0 + erf((np.asarray(t, dtype=float) - t_star) / s))


def transition_resistance(cfg: InstrumentConfig, t, t_star: float):
    """Noiseless sample resistance at temperature t (K), in ohm."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise DomainError("temperature must be > 0")
    r = resistive_transition(t_arr, t_star, cfg.transition_width, cfg.normal_resistance)
    return float(r) if np.isscalar(t) or t_arr.ndim == 0 else r


def noise_stream(seed: int, *path: int) -> np.random.Generator:
    """Independent substream for one acquisition unit.

    Substreams are keyed by the integer tuple ``(seed, *path)`` fed to
    a SeedSequence, e.g. ``(seed, trial, field_index, kind_code,
    repetition)``.  Equal keys give bit-identical streams regardless of
    creation order, which makes datasets order-insensitive.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, path)]))


def measure_resistance(cfg: InstrumentConfig, t_setpoint: float, t_star: float,
                       rng: np.random.Generator) -> float:
    """One noisy four-wire reading at a setpoint (K).

    Setpoints below the cryostat floor are clamped (callers flag them
    by comparing against ``base_temperature``).  Each call consumes one
    jitter draw and one resistance-noise draw, so readings are
    reproducible from the substream key and draw index alone.
    """
    t = max(float(t_setpoint), cfg.base_temperature)
    jitter_k = rng.normal(0.0, cfg.temperature_jitter) * 1e-3
    noise = rng.normal(0.0, cfg.resistance_noise)
    return float(transition_resistance(cfg, t + jitter_k, t_star)) + noise


def measure_profile(cfg: InstrumentConfig, t_setpoints: np.ndarray, t_star: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Vectorized sweep readout over a setpoint grid (K).

    Draws the jitter block first, then the resistance-noise block, so a
    whole curve costs two generator calls and stays deterministic per
    substream.
    """
    t = np.maximum(np.asarray(t_setpoints, dtype=float), cfg.base_temperature)
    jitter_k = rng.normal(0.0, cfg.temperature_jitter, t.shape) * 1e-3
    noise = rng.normal(0.0, cfg.resistance_noise, t.shape)
    return transition_resistance(cfg, t + jitter_k, t_star) + noise
