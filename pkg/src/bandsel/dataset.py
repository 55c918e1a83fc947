"""Spectra ingestion, sensor merging, outlier screening, and nitrogen class splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ParseError, ValidationError

ID_COLUMNS = ("sample_id", "vine_id")


@dataclass(frozen=True)
class SpectraTable:
    """Reflectance samples over a strictly ascending wavelength grid."""

    sample_ids: tuple[str, ...]
    vine_ids: tuple[str, ...]
    wavelengths_nm: np.ndarray
    reflectance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        object.__setattr__(self, "vine_ids", tuple(str(v) for v in self.vine_ids))
        wl = np.asarray(self.wavelengths_nm, dtype=float)
        refl = np.asarray(self.reflectance, dtype=float)
        object.__setattr__(self, "wavelengths_nm", wl)
        object.__setattr__(self, "reflectance", refl)
        if wl.ndim != 1 or refl.ndim != 2:
            raise ValidationError("wavelengths must be 1-D and reflectance 2-D")
        if len(self.sample_ids) != len(self.vine_ids):
            raise ValidationError("sample_ids and vine_ids must be parallel")
        if refl.shape != (len(self.sample_ids), wl.shape[0]):
            raise ValidationError(
                f"reflectance shape {refl.shape} does not match "
                f"{len(self.sample_ids)} samples x {wl.shape[0]} wavelengths"
            )
        if wl.size and (not np.isfinite(wl).all() or (wl <= 0).any()):
            raise ValidationError("wavelengths must be finite and positive")
        if np.any(np.diff(wl) <= 0):
            raise ValidationError("wavelengths must be strictly increasing")
        if refl.size and not np.isfinite(refl).all():
            raise ValidationError("reflectance contains non-finite values")
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise ValidationError("duplicate sample_id values")

    @property
    def n_samples(self) -> int:
        return len(self.sample_ids)

    @property
    def n_wavelengths(self) -> int:
        return int(self.wavelengths_nm.shape[0])

    def take_rows(self, selector) -> "SpectraTable":
        """New table with the rows picked by a boolean mask or index array."""
        idx = np.arange(self.n_samples)[selector]
        return SpectraTable(
            tuple(self.sample_ids[i] for i in idx),
            tuple(self.vine_ids[i] for i in idx),
            self.wavelengths_nm,
            self.reflectance[idx],
        )


@dataclass(frozen=True)
class NitrogenLabel:
    """Total nitrogen for one vine, as a percentage of dry mass."""

    vine_id: str
    nitrogen_pct: float

    def __post_init__(self):
        object.__setattr__(self, "vine_id", str(self.vine_id))
        object.__setattr__(self, "nitrogen_pct", float(self.nitrogen_pct))
        if not np.isfinite(self.nitrogen_pct) or self.nitrogen_pct <= 0:
            raise ValidationError(
                f"nitrogen_pct for vine {self.vine_id!r} must be finite and positive"
            )


@dataclass(frozen=True)
class ClassThresholds:
    """Nitrogen cut points separating extreme, inner, and excluded samples."""

    low_max: float = 2.55
    inner_low_max: float = 2.66
    inner_high_min: float = 3.35
    high_min: float = 3.4

    def __post_init__(self):
        ok = self.low_max < self.inner_low_max <= self.inner_high_min < self.high_min
        if not ok:
            raise ValidationError(
                "thresholds must satisfy low_max < inner_low_max <= inner_high_min < high_min"
            )

    def to_dict(self) -> dict:
        return {
            "low_max": self.low_max,
            "inner_low_max": self.inner_low_max,
            "inner_high_min": self.inner_high_min,
            "high_min": self.high_min,
        }


@dataclass(frozen=True)
class LabeledDataset:
    """Extreme-nitrogen training split and inner-nitrogen test split."""

    x_extreme: SpectraTable
    y_extreme: np.ndarray
    x_inner: SpectraTable
    y_inner: np.ndarray
    n_excluded_middle: int

    def __post_init__(self):
        for attr, table in (("y_extreme", self.x_extreme), ("y_inner", self.x_inner)):
            y = np.asarray(getattr(self, attr), dtype=int)
            object.__setattr__(self, attr, y)
            if y.shape != (table.n_samples,):
                raise ValidationError(f"{attr} is not parallel to its table")
            if y.size and not np.isin(y, (0, 1)).all():
                raise ValidationError(f"{attr} must contain only 0/1 labels")


def load_spectra(path) -> SpectraTable:
    """Read a spectra CSV: header ``sample_id,vine_id,<nm>,<nm>,...``.

    Wavelength columns are reordered ascending when needed; any non-numeric
    or non-finite reflectance cell is a parse error naming its row/column.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"spectra file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in header]
    if len(header) < 3 or tuple(header[:2]) != ID_COLUMNS:
        raise ParseError(
            f"{path}: header must start with 'sample_id,vine_id', got {header[:2]}"
        )
    wl_columns = header[2:]
    wavelengths = []
    for col in wl_columns:
        try:
            wavelengths.append(float(col))
        except ValueError:
            raise ParseError(f"{path}: wavelength column {col!r} is not numeric") from None
    if len(set(wl_columns)) != len(wl_columns):
        raise ParseError(f"{path}: duplicate wavelength columns in header")

    df = pd.read_csv(
        path, dtype={"sample_id": str, "vine_id": str}, float_precision="round_trip"
    )
    raw = df.loc[:, wl_columns].to_numpy()
    if raw.dtype.kind in "fiu":
        matrix = raw.astype(float)
    else:
        matrix = pd.to_numeric(pd.Series(raw.ravel()), errors="coerce").to_numpy()
        matrix = matrix.reshape(raw.shape).astype(float)
    bad = np.argwhere(~np.isfinite(matrix))
    if bad.size:
        i, j = bad[0]
        raise ParseError(
            f"{path}: non-numeric or non-finite reflectance at row {int(i) + 2},"
            f" column {wl_columns[int(j)]!r}"
        )

    sample_ids = df["sample_id"].tolist()
    if len(set(sample_ids)) != len(sample_ids):
        dup = next(s for s in sample_ids if sample_ids.count(s) > 1)
        raise ValidationError(f"{path}: duplicate sample_id {dup!r}")

    wavelengths = np.asarray(wavelengths, dtype=float)
    order = np.argsort(wavelengths, kind="stable")
    if np.any(np.diff(wavelengths[order]) == 0):
        raise ParseError(f"{path}: duplicate wavelength values in header")
    if not np.array_equal(order, np.arange(order.size)):
        wavelengths = wavelengths[order]
        matrix = matrix[:, order]
    return SpectraTable(sample_ids, df["vine_id"].tolist(), wavelengths, matrix)


def load_labels(path) -> list[NitrogenLabel]:
    """Read a labels CSV with header ``vine_id,nitrogen_pct``."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"labels file not found: {path}")
    df = pd.read_csv(path, dtype={"vine_id": str}, float_precision="round_trip")
    if list(df.columns[:2]) != ["vine_id", "nitrogen_pct"]:
        raise ParseError(
            f"{path}: header must be 'vine_id,nitrogen_pct', got {list(df.columns[:2])}"
        )
    values = pd.to_numeric(df["nitrogen_pct"], errors="coerce").to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ParseError(f"{path}: non-numeric nitrogen_pct at row {int(bad[0]) + 2}")
    labels = []
    seen = set()
    for vine, value in zip(df["vine_id"], values):
        if vine in seen:
            raise ValidationError(f"{path}: duplicate label for vine {vine!r}")
        seen.add(vine)
        labels.append(NitrogenLabel(vine, value))
    return labels


def write_spectra_csv(table: SpectraTable, path) -> None:
    df = pd.DataFrame(
        table.reflectance, columns=[repr(float(w)) for w in table.wavelengths_nm]
    )
    df.insert(0, "vine_id", table.vine_ids)
    df.insert(0, "sample_id", table.sample_ids)
    df.to_csv(path, index=False)


def write_labels_csv(labels, path) -> None:
    df = pd.DataFrame(
        {
            "vine_id": [lab.vine_id for lab in labels],
            "nitrogen_pct": [lab.nitrogen_pct for lab in labels],
        }
    )
    df.to_csv(path, index=False)


def merge_sensors(
    vis: SpectraTable,
    nir: SpectraTable,
    vis_lo_nm: float = 400.0,
    vis_hi_nm: float = 900.0,
) -> SpectraTable:
    """Clip the visible sensor to [vis_lo_nm, vis_hi_nm] and append the NIR table.

    Rows are aligned by sample_id, not file order. The clipped visible range
    must end strictly below the first NIR wavelength.
    """
    if not vis_lo_nm < vis_hi_nm:
        raise ValidationError("vis_lo_nm must be strictly below vis_hi_nm")
    if set(vis.sample_ids) != set(nir.sample_ids):
        odd = sorted(set(vis.sample_ids) ^ set(nir.sample_ids))
        raise ValidationError(f"sample ids differ between sensor tables: {odd[:5]}")
    nir_row = {sid: i for i, sid in enumerate(nir.sample_ids)}
    order = [nir_row[sid] for sid in vis.sample_ids]
    for i, sid in enumerate(vis.sample_ids):
        if nir.vine_ids[order[i]] != vis.vine_ids[i]:
            raise ValidationError(f"vine_id mismatch between sensors for sample {sid!r}")

    keep = (vis.wavelengths_nm >= vis_lo_nm) & (vis.wavelengths_nm <= vis_hi_nm)
    vis_wl = vis.wavelengths_nm[keep]
    if vis_wl.size and vis_wl.max() >= nir.wavelengths_nm.min():
        raise ValidationError("sensor wavelength ranges overlap after clipping")
    wavelengths = np.concatenate([vis_wl, nir.wavelengths_nm])
    reflectance = np.hstack([vis.reflectance[:, keep], nir.reflectance[order]])
    return SpectraTable(vis.sample_ids, vis.vine_ids, wavelengths, reflectance)


def remove_outliers(
    table: SpectraTable, z_threshold: float = 3.0
) -> tuple[SpectraTable, tuple[str, ...]]:
    """Drop samples with any reflectance beyond z_threshold column stds.

    Column statistics are computed once over the full table (single pass,
    population std); they are not recomputed after removals.
    """
    if not z_threshold > 0:
        raise ValidationError("z_threshold must be positive")
    if table.n_samples == 0:
        raise ValidationError("cannot screen an empty table")
    x = table.reflectance
    mu = x.mean(axis=0)
    sigma = x.std(axis=0)
    outlier = (np.abs(x - mu) > z_threshold * sigma).any(axis=1)
    if outlier.all():
        raise ValidationError("outlier screening removed every sample")
    removed = tuple(sid for sid, out in zip(table.sample_ids, outlier) if out)
    return table.take_rows(~outlier), removed


def assign_classes(
    table: SpectraTable,
    labels,
    thresholds: ClassThresholds | None = None,
) -> LabeledDataset:
    """Split samples into extreme (train), inner (test), and excluded middle.

    Each sample inherits its vine's nitrogen value. Boundary behavior follows
    the threshold inequalities exactly: N == low_max is extreme class 0,
    N == high_min is extreme class 1, and N equal to either inner bound is
    excluded.
    """
    t = thresholds or ClassThresholds()
    by_vine = {}
    for lab in labels:
        if lab.vine_id in by_vine:
            raise ValidationError(f"duplicate nitrogen label for vine {lab.vine_id!r}")
        by_vine[lab.vine_id] = lab.nitrogen_pct
    missing = sorted({v for v in table.vine_ids if v not in by_vine})
    if missing:
        raise ValidationError(f"vines without nitrogen labels: {', '.join(missing[:10])}")

    n = np.asarray([by_vine[v] for v in table.vine_ids], dtype=float)
    extreme = (n <= t.low_max) | (n >= t.high_min)
    inner = ((t.low_max < n) & (n < t.inner_low_max)) | (
        (t.inner_high_min < n) & (n < t.high_min)
    )
    y_extreme = (n[extreme] >= t.high_min).astype(int)
    y_inner = (n[inner] > t.inner_high_min).astype(int)
    n_excluded = int(table.n_samples - extreme.sum() - inner.sum())
    return LabeledDataset(
        x_extreme=table.take_rows(extreme),
        y_extreme=y_extreme,
        x_inner=table.take_rows(inner),
        y_inner=y_inner,
        n_excluded_middle=n_excluded,
    )
