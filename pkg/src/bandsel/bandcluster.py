"""Clusters top-ranked wavelengths into camera-width bands and resolves overlaps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import SpectraTable
from .ensemble import EliminationTrace, recursive_ranker_elimination
from .errors import ValidationError
from .rankers import RankerConfig, build_ranker_suite, rank_all
from .utils import fmt_nm, seed_for
from .validation import as_float_matrix
from .windowing import Window, apply_normalizer, fit_normalizer

ALLOWED_WIDTHS = (10.0, 20.0, 40.0)


@dataclass(frozen=True)
class Band:
    """A nominal 10/20/40 nm band snapped to the measured wavelength grid."""

    center_nm: float
    nominal_width_nm: float
    lo_nm: float
    hi_nm: float
    member_wavelengths: tuple[float, ...]
    source_windows: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.lo_nm <= self.center_nm <= self.hi_nm:
            raise ValidationError("band center must lie within [lo, hi]")
        if not self.member_wavelengths:
            raise ValidationError("band covers no measured wavelength")
        members = np.asarray(self.member_wavelengths, dtype=float)
        if members.min() < self.lo_nm or members.max() > self.hi_nm:
            raise ValidationError("band members must lie within [lo, hi]")

    @property
    def name(self) -> str:
        return fmt_nm(self.center_nm)

    @property
    def width_nm(self) -> float:
        return self.hi_nm - self.lo_nm

    def overlaps(self, other: "Band") -> bool:
        """Open-interval overlap: a shared endpoint does not count."""
        return max(self.lo_nm, other.lo_nm) < min(self.hi_nm, other.hi_nm)

    def to_json_dict(self) -> dict:
        return {
            "center": self.center_nm,
            "nominal_width": self.nominal_width_nm,
            "lo": self.lo_nm,
            "hi": self.hi_nm,
        }


def _nearest_measured(ideal: float, measured: np.ndarray, prefer_low: bool) -> float:
    """Nearest grid wavelength to an ideal band edge; exact ties snap outward."""
    pos = int(np.searchsorted(measured, ideal))
    if pos == 0:
        return float(measured[0])
    if pos == measured.size:
        return float(measured[-1])
    below, above = float(measured[pos - 1]), float(measured[pos])
    d_below, d_above = ideal - below, above - ideal
    if d_below < d_above:
        return below
    if d_above < d_below:
        return above
    return below if prefer_low else above


def band_from_center(
    center: float,
    nominal_width: float,
    measured,
    sensor_lo_nm: float | None = None,
    sensor_hi_nm: float | None = None,
    source_windows: tuple[str, ...] = (),
) -> Band:
    """Materialize a band: edges at center +/- width/2, rounded to the grid.

    Edge rounding goes to the nearest measured wavelength (ties outward), so
    the realized width can exceed the nominal one by up to the local grid
    gap, and is clipped wherever the ideal edge falls outside the sensor.
    """
    measured = np.asarray(measured, dtype=float)
    if sensor_lo_nm is not None or sensor_hi_nm is not None:
        lo_lim = measured[0] if sensor_lo_nm is None else sensor_lo_nm
        hi_lim = measured[-1] if sensor_hi_nm is None else sensor_hi_nm
        measured = measured[(measured >= lo_lim) & (measured <= hi_lim)]
    if measured.size == 0:
        raise ValidationError("no measured wavelengths within the sensor limits")
    lo = _nearest_measured(center - nominal_width / 2, measured, prefer_low=True)
    hi = _nearest_measured(center + nominal_width / 2, measured, prefer_low=False)
    # keep the center inside even on grids coarser than the band width
    lo = min(lo, float(measured[measured <= center].max(initial=measured[0])))
    hi = max(hi, float(measured[measured >= center].min(initial=measured[-1])))
    members = measured[(measured >= lo) & (measured <= hi)]
    return Band(float(center), float(nominal_width), lo, hi, tuple(members), source_windows)


def cluster_band(
    selected_wavelengths,
    measured,
    sensor_lo_nm: float | None = None,
    sensor_hi_nm: float | None = None,
    allowed_widths=ALLOWED_WIDTHS,
    source_windows: tuple[str, ...] = (),
) -> Band:
    """Grow a band around the top-ranked wavelength by running-mean accretion.

    Wavelengths are visited in rank order. Each is tentatively added; the
    running-mean center moves with it, and the addition stands only if some
    allowed width still covers every accepted wavelength around the new
    center. Rejected wavelengths are skipped, not split into a second band.
    """
    selected = [float(w) for w in selected_wavelengths]
    if not selected:
        raise ValidationError("no wavelengths to cluster")
    measured_arr = np.asarray(measured, dtype=float)
    lo_lim = measured_arr[0] if sensor_lo_nm is None else sensor_lo_nm
    hi_lim = measured_arr[-1] if sensor_hi_nm is None else sensor_hi_nm
    if min(selected) < lo_lim or max(selected) > hi_lim:
        raise ValidationError("selected wavelengths fall outside the sensor limits")
    widths = sorted(float(w) for w in allowed_widths)
    if not widths:
        raise ValidationError("allowed_widths is empty")

    accepted = [selected[0]]
    for w in selected[1:]:
        candidate = accepted + [w]
        center = float(np.mean(candidate))
        span = 2.0 * max(abs(v - center) for v in candidate)
        if span <= widths[-1] + 1e-9:
            accepted = candidate
    center = float(np.mean(accepted))
    span = 2.0 * max(abs(v - center) for v in accepted)
    nominal = next(w for w in widths if span <= w + 1e-9)
    return band_from_center(
        center, nominal, measured_arr, sensor_lo_nm, sensor_hi_nm, source_windows
    )


def _merged_width(a: Band, b: Band) -> float:
    """Re-clustering width rules for an overlapping pair.

    A 40 nm band absorbs anything into a new 40; 10 + 20 makes a 20; equal
    widths stay put when the centers are within half that width of each
    other, otherwise they round up one step.
    """
    wa, wb = a.nominal_width_nm, b.nominal_width_nm
    delta = abs(a.center_nm - b.center_nm)
    if 40.0 in (wa, wb):
        return 40.0
    if {wa, wb} == {10.0, 20.0}:
        return 20.0
    if wa == wb == 20.0:
        return 20.0 if delta <= 10.0 else 40.0
    if wa == wb == 10.0:
        return 10.0 if delta <= 5.0 else 20.0
    raise ValidationError(f"no merge rule for widths {wa} and {wb}")


def resolve_overlaps(
    bands,
    measured,
    sensor_lo_nm: float | None = None,
    sensor_hi_nm: float | None = None,
) -> tuple[Band, ...]:
    """Merge overlapping bands (leftmost pair first) until none overlap.

    The merged band is re-clustered at the midpoint of the two centers with
    the width given by the pair rules. Overlap is open-interval, so bands
    that merely touch at an endpoint stay separate.
    """
    current = sorted(bands, key=lambda b: (b.center_nm, b.lo_nm))
    while True:
        pair = None
        for i in range(len(current)):
            for j in range(i + 1, len(current)):
                if current[i].overlaps(current[j]):
                    pair = (i, j)
                    break
            if pair:
                break
        if pair is None:
            return tuple(current)
        a, b = current[pair[0]], current[pair[1]]
        merged = band_from_center(
            (a.center_nm + b.center_nm) / 2,
            _merged_width(a, b),
            measured,
            sensor_lo_nm,
            sensor_hi_nm,
            source_windows=tuple(dict.fromkeys(a.source_windows + b.source_windows)),
        )
        current = [band for k, band in enumerate(current) if k not in pair]
        current.append(merged)
        current.sort(key=lambda b: (b.center_nm, b.lo_nm))


def within_window_selection(
    window: Window,
    x_train_raw,
    wavelengths_nm,
    y,
    ranker_config: RankerConfig | None = None,
    seed: int = 0,
    cv_folds: int = 10,
    shrinkage: float = 1e-6,
    max_k: int | None = None,
) -> tuple[list[float], EliminationTrace | None]:
    """Rank the raw wavelengths inside one window and keep the winning subset.

    The window's columns are normalized with training statistics, ranked by
    the full suite, and run through recursive ranker elimination. Returns the
    winner's wavelengths ordered by the winning ensemble's aggregate rank
    (best first). Singleton windows short-circuit.
    """
    wavelengths = np.asarray(wavelengths_nm, dtype=float)
    cols = list(window.member_indices)
    if len(cols) == 1:
        return [float(wavelengths[cols[0]])], None
    x = as_float_matrix(x_train_raw)
    names = [fmt_nm(wavelengths[c]) for c in cols]
    by_name = dict(zip(names, (float(wavelengths[c]) for c in cols)))
    x_window = x[:, cols]
    norm = fit_normalizer(x_window, names)
    x_norm = apply_normalizer(norm, x_window)
    suite = build_ranker_suite(ranker_config, seed_for(seed, "window", window.name))
    vectors = rank_all(suite, x_norm, y, names)
    trace = recursive_ranker_elimination(
        vectors,
        x_norm,
        y,
        cv_seed=seed_for(seed, "window-cv", window.name),
        max_k=max_k,
        folds=cv_folds,
        shrinkage=shrinkage,
    )
    return [by_name[name] for name in trace.winner.features], trace


def apply_band_windows(table, bands, wavelengths_nm=None) -> tuple[np.ndarray, tuple[str, ...]]:
    """Average each band's member wavelengths into one feature, ordered by center."""
    if isinstance(table, SpectraTable):
        x, wl = table.reflectance, table.wavelengths_nm
    else:
        x = as_float_matrix(table)
        if wavelengths_nm is None:
            raise ValidationError("wavelengths_nm is required for a plain matrix")
        wl = np.asarray(wavelengths_nm, dtype=float)
    ordered = sorted(bands, key=lambda b: b.center_nm)
    for i in range(len(ordered) - 1):
        if ordered[i].overlaps(ordered[i + 1]):
            raise ValidationError(
                f"bands {ordered[i].name} and {ordered[i + 1].name} overlap"
            )
    columns = []
    names = []
    for band in ordered:
        idx = np.flatnonzero((wl >= band.lo_nm) & (wl <= band.hi_nm))
        if idx.size == 0:
            raise ValidationError(f"band {band.name} covers no measured wavelength")
        columns.append(x[:, idx].mean(axis=1))
        names.append(band.name)
    return np.column_stack(columns), tuple(names)
