"""Synthetic leaf-spectra generator with plantable informative bands.

The model per leaf is a fixed smooth baseline scaled by a per-leaf brightness
factor, plus Gaussian band effects driven by nitrogen, and AR(1) noise along
the wavelength axis. The brightness jitter produces the broad cross-spectrum
correlation blocks real reflectance shows, while the AR coefficient controls
how fast correlation decays between neighboring columns.

Each planted band also carries an independent per-leaf strength nuisance.
Without it, the difference of two nearby correlated windows is almost
noise-free, and a classifier can reach perfect accuracy from a single band
plus any reference window; the nuisance is what makes combining several
planted bands genuinely pay off, as it does in real reflectance data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import NitrogenLabel, SpectraTable
from .errors import ValidationError

_FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))

# baseline reflectance shape: floor plus broad fixed bumps (center, sigma, amplitude).
# The floor is kept high so the per-leaf brightness factor dominates column
# variance everywhere, which is what produces wide correlated blocks.
_BASELINE_FLOOR = 0.30
_BASELINE_BUMPS = (
    (560.0, 60.0, 0.08),
    (850.0, 180.0, 0.18),
    (1250.0, 150.0, 0.12),
    (1600.0, 120.0, 0.06),
)


@dataclass(frozen=True)
class SensorGrid:
    lo_nm: float
    hi_nm: float
    step_nm: float

    def __post_init__(self):
        if not (self.lo_nm > 0 and self.lo_nm < self.hi_nm and self.step_nm > 0):
            raise ValidationError("sensor grid needs 0 < lo < hi and step > 0")

    def wavelengths(self) -> np.ndarray:
        count = int(np.floor((self.hi_nm - self.lo_nm) / self.step_nm)) + 1
        return np.round(self.lo_nm + self.step_nm * np.arange(count), 6)

    def to_dict(self) -> dict:
        return {"lo_nm": self.lo_nm, "hi_nm": self.hi_nm, "step_nm": self.step_nm}


@dataclass(frozen=True)
class InformativeBand:
    center_nm: float
    width_nm: float
    effect_size: float

    def __post_init__(self):
        if self.width_nm <= 0 or not np.isfinite(self.effect_size):
            raise ValidationError("informative band needs width > 0 and finite effect")

    def to_dict(self) -> dict:
        return {
            "center_nm": self.center_nm,
            "width_nm": self.width_nm,
            "effect_size": self.effect_size,
        }


@dataclass(frozen=True)
class SynthConfig:
    n_vines: int = 150
    leaves_per_vine: int = 20
    sensor_grids: tuple[SensorGrid, ...] = (
        SensorGrid(400.0, 900.0, 0.4),
        SensorGrid(936.0, 1660.0, 6.0),
    )
    informative_bands: tuple[InformativeBand, ...] = (
        InformativeBand(550.0, 12.0, 0.04),
        InformativeBand(980.0, 12.0, 0.04),
        InformativeBand(1450.0, 12.0, 0.04),
    )
    ar_coefficient: float = 0.995
    noise_sigma: float = 0.001
    brightness_sigma: float = 0.1
    band_nuisance_sigma: float = 0.02
    nitrogen_range: tuple[float, float] = (2.4, 3.6)
    seed: int = 0

    def __post_init__(self):
        if self.n_vines < 1 or self.leaves_per_vine < 1:
            raise ValidationError("n_vines and leaves_per_vine must be positive")
        if not self.sensor_grids:
            raise ValidationError("at least one sensor grid is required")
        if not 0 <= self.ar_coefficient < 1:
            raise ValidationError("ar_coefficient must lie in [0, 1)")
        if self.noise_sigma <= 0:
            raise ValidationError("noise_sigma must be positive")
        if self.brightness_sigma < 0:
            raise ValidationError("brightness_sigma must be non-negative")
        if self.band_nuisance_sigma < 0:
            raise ValidationError("band_nuisance_sigma must be non-negative")
        lo, hi = self.nitrogen_range
        if not 0 < lo < hi:
            raise ValidationError("nitrogen_range must satisfy 0 < lo < hi")
        grid_lo = min(g.lo_nm for g in self.sensor_grids)
        grid_hi = max(g.hi_nm for g in self.sensor_grids)
        for band in self.informative_bands:
            if not grid_lo <= band.center_nm <= grid_hi:
                raise ValidationError(
                    f"informative band at {band.center_nm} nm is outside the sensor range"
                )

    def wavelengths(self) -> np.ndarray:
        parts = [g.wavelengths() for g in self.sensor_grids]
        wl = np.concatenate(parts)
        if np.any(np.diff(wl) <= 0):
            raise ValidationError("sensor grids must be disjoint and ascending")
        return wl

    def to_dict(self) -> dict:
        return {
            "n_vines": self.n_vines,
            "leaves_per_vine": self.leaves_per_vine,
            "sensor_grids": [g.to_dict() for g in self.sensor_grids],
            "informative_bands": [b.to_dict() for b in self.informative_bands],
            "ar_coefficient": self.ar_coefficient,
            "noise_sigma": self.noise_sigma,
            "brightness_sigma": self.brightness_sigma,
            "band_nuisance_sigma": self.band_nuisance_sigma,
            "nitrogen_range": list(self.nitrogen_range),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        data = dict(data)
        if "sensor_grids" in data:
            data["sensor_grids"] = tuple(SensorGrid(**g) for g in data["sensor_grids"])
        if "informative_bands" in data:
            data["informative_bands"] = tuple(
                InformativeBand(**b) for b in data["informative_bands"]
            )
        if "nitrogen_range" in data:
            data["nitrogen_range"] = tuple(data["nitrogen_range"])
        return cls(**data)


def baseline_reflectance(wavelengths) -> np.ndarray:
    wl = np.asarray(wavelengths, dtype=float)
    out = np.full(wl.shape, _BASELINE_FLOOR)
    for center, sigma, amplitude in _BASELINE_BUMPS:
        out += amplitude * np.exp(-0.5 * ((wl - center) / sigma) ** 2)
    return out


def band_profile(wavelengths, center_nm: float, width_nm: float) -> np.ndarray:
    """Gaussian profile with unit peak and FWHM equal to the band width."""
    wl = np.asarray(wavelengths, dtype=float)
    sigma = width_nm * _FWHM_TO_SIGMA
    return np.exp(-0.5 * ((wl - center_nm) / sigma) ** 2)


def generate(config: SynthConfig) -> tuple[SpectraTable, list[NitrogenLabel]]:
    """Deterministically sample a spectra table and per-vine nitrogen labels."""
    rng = np.random.default_rng(config.seed)
    wl = config.wavelengths()
    d = wl.shape[0]
    n_samples = config.n_vines * config.leaves_per_vine
    lo, hi = config.nitrogen_range
    midrange = (lo + hi) / 2.0

    nitrogen = rng.uniform(lo, hi, size=config.n_vines)
    brightness = 1.0 + config.brightness_sigma * rng.standard_normal(n_samples)
    nuisance = config.band_nuisance_sigma * rng.standard_normal(
        (n_samples, len(config.informative_bands))
    )
    innovations = config.noise_sigma * rng.standard_normal((n_samples, d))

    noise = np.empty_like(innovations)
    ar = config.ar_coefficient
    noise[:, 0] = innovations[:, 0] / np.sqrt(1.0 - ar**2)
    for j in range(1, d):
        noise[:, j] = ar * noise[:, j - 1] + innovations[:, j]

    base = baseline_reflectance(wl)
    vine_of = np.repeat(np.arange(config.n_vines), config.leaves_per_vine)
    deviation = nitrogen[vine_of] - midrange
    reflectance = brightness[:, None] * base[None, :] + noise
    for b, band in enumerate(config.informative_bands):
        profile = band_profile(wl, band.center_nm, band.width_nm)
        strength = band.effect_size * deviation + nuisance[:, b]
        reflectance += strength[:, None] * profile[None, :]

    vine_ids = [f"v{v:03d}" for v in range(config.n_vines)]
    sample_ids = [
        f"v{v:03d}_l{leaf:02d}"
        for v in range(config.n_vines)
        for leaf in range(config.leaves_per_vine)
    ]
    table = SpectraTable(
        sample_ids, [vine_ids[v] for v in vine_of], wl, reflectance
    )
    labels = [NitrogenLabel(vine_ids[v], nitrogen[v]) for v in range(config.n_vines)]
    return table, labels
