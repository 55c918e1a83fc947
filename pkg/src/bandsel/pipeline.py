"""End-to-end orchestration: prepare, select, evaluate, and artifact export."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bandcluster import (
    Band,
    apply_band_windows,
    cluster_band,
    resolve_overlaps,
    within_window_selection,
)
from .classify import QdaClassifier, weighted_f1
from .dataset import (
    ClassThresholds,
    LabeledDataset,
    SpectraTable,
    assign_classes,
    load_labels,
    load_spectra,
    merge_sensors,
    remove_outliers,
)
from .ensemble import (
    EliminationTrace,
    SubsetCvScorer,
    SubsetEvaluation,
    aggregate_ranks,
    evaluate_nested_subsets,
    fitness,
    recursive_ranker_elimination,
)
from .errors import ValidationError
from .ranking import RankVector
from .rankers import RANKER_NAMES, RankerConfig, build_ranker_suite, rank_all
from .synthgen import SynthConfig, generate
from .utils import atomic_write_text, canonical_json, fmt_nm, seed_for
from .windowing import (
    WindowMap,
    apply_normalizer,
    apply_windows,
    build_windows,
    correlation_matrix,
    fit_normalizer,
)

logger = logging.getLogger(__name__)

COMPARISON_ORDER = (
    "None",
    "SelectKBest",
    "SVM-RFE",
    "ReliefF",
    "Random Forest",
    "LASSO",
    "CCSA",
    "Full Ensemble",
    "Recursive Ranker Elimination",
    "Full Pipeline",
)


@dataclass
class PipelineConfig:
    """Everything one run needs; JSON round-trippable via to/from_json_dict."""

    spectra_csv: str | None = None
    vis_csv: str | None = None
    nir_csv: str | None = None
    labels_csv: str | None = None
    synth: SynthConfig | None = field(default_factory=SynthConfig)
    thresholds: ClassThresholds = field(default_factory=ClassThresholds)
    vis_clip: tuple[float, float] = (400.0, 900.0)
    outlier_z: float = 3.0
    correlation_threshold: float = 0.99
    rankers: RankerConfig = field(default_factory=RankerConfig)
    cv_folds: int = 10
    shrinkage: float = 1e-6
    allowed_band_widths: tuple[float, ...] = (10.0, 20.0, 40.0)
    max_k: int | None = None
    seed: int = 0
    threads: int = 1
    out_dir: str = "bandsel_out"

    def __post_init__(self):
        file_input = self.spectra_csv is not None or self.vis_csv is not None
        if file_input and self.synth is not None:
            # file paths win over the synth block when both are present
            self.synth = None
        if self.spectra_csv is not None and self.vis_csv is not None:
            raise ValidationError("give either spectra_csv or vis_csv/nir_csv, not both")
        if (self.vis_csv is None) != (self.nir_csv is None):
            raise ValidationError("vis_csv and nir_csv must be given together")
        if file_input and self.labels_csv is None:
            raise ValidationError("labels_csv is required with file input")
        if self.synth is None and not file_input:
            raise ValidationError("no input: set spectra_csv, vis_csv/nir_csv, or synth")
        if self.threads < 1:
            raise ValidationError("threads must be positive")

    def to_json_dict(self) -> dict:
        return {
            "input": {
                "spectra_csv": self.spectra_csv,
                "vis_csv": self.vis_csv,
                "nir_csv": self.nir_csv,
                "labels_csv": self.labels_csv,
                "synth": None if self.synth is None else self.synth.to_dict(),
            },
            "thresholds": self.thresholds.to_dict(),
            "vis_clip": list(self.vis_clip),
            "outlier_z": self.outlier_z,
            "correlation_threshold": self.correlation_threshold,
            "rankers": self.rankers.to_dict(),
            "cv_folds": self.cv_folds,
            "shrinkage": self.shrinkage,
            "allowed_band_widths": list(self.allowed_band_widths),
            "max_k": self.max_k,
            "seed": self.seed,
            "threads": self.threads,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PipelineConfig":
        src = data.get("input", {})
        synth = src.get("synth")
        return cls(
            spectra_csv=src.get("spectra_csv"),
            vis_csv=src.get("vis_csv"),
            nir_csv=src.get("nir_csv"),
            labels_csv=src.get("labels_csv"),
            synth=None if synth is None else SynthConfig.from_dict(synth),
            thresholds=ClassThresholds(**data.get("thresholds", {})),
            vis_clip=tuple(data.get("vis_clip", (400.0, 900.0))),
            outlier_z=data.get("outlier_z", 3.0),
            correlation_threshold=data.get("correlation_threshold", 0.99),
            rankers=RankerConfig.from_dict(data.get("rankers", {})),
            cv_folds=data.get("cv_folds", 10),
            shrinkage=data.get("shrinkage", 1e-6),
            allowed_band_widths=tuple(data.get("allowed_band_widths", (10.0, 20.0, 40.0))),
            max_k=data.get("max_k"),
            seed=data.get("seed", 0),
            threads=data.get("threads", 1),
            out_dir=data.get("out_dir", "bandsel_out"),
        )


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON config: {exc}") from None
    return PipelineConfig.from_json_dict(data)


@dataclass
class PreparedData:
    dataset: LabeledDataset
    n_input_samples: int
    removed_outliers: tuple[str, ...]

    @property
    def wavelengths(self) -> np.ndarray:
        return self.dataset.x_extreme.wavelengths_nm

    def summary(self) -> dict:
        ds = self.dataset
        return {
            "n_input_samples": self.n_input_samples,
            "n_outliers_removed": len(self.removed_outliers),
            "removed_sample_ids": list(self.removed_outliers),
            "n_extreme": ds.x_extreme.n_samples,
            "n_inner": ds.x_inner.n_samples,
            "n_excluded_middle": ds.n_excluded_middle,
            "n_wavelengths": int(self.wavelengths.shape[0]),
        }


@dataclass
class WithinWindowResult:
    window_name: str
    selected_wavelengths: list[float]
    trace: EliminationTrace | None
    band: Band


@dataclass
class SelectionResult:
    window_map: WindowMap
    feature_names: tuple[str, ...]
    rank_vectors: dict[str, RankVector]
    full_ensemble: RankVector
    rre_windowed: EliminationTrace
    within: list[WithinWindowResult]
    bands_initial: tuple[Band, ...]
    bands: tuple[Band, ...]
    band_feature_names: tuple[str, ...]
    band_rank_vectors: dict[str, RankVector] | None
    rre_bands: EliminationTrace | None
    winner_band_names: tuple[str, ...]
    correlation: np.ndarray | None = None  # kept in memory only, never persisted


@dataclass(frozen=True)
class ComparisonRow:
    method: str
    subset_size: int
    features: tuple[str, ...]
    f1_mean_extreme: float
    f1_std_extreme: float
    f1_moderate: float | None

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "subset_size": self.subset_size,
            "features": list(self.features),
            "f1_mean_extreme": self.f1_mean_extreme,
            "f1_std_extreme": self.f1_std_extreme,
            "f1_moderate": self.f1_moderate,
        }


@dataclass
class EvaluationResult:
    final_bands: tuple[str, ...]
    f1_mean_extreme: float
    f1_std_extreme: float
    f1_moderate: float | None
    comparison: list[ComparisonRow]


@dataclass
class Report:
    config: PipelineConfig
    prepared: dict
    selection: SelectionResult
    evaluation: EvaluationResult
    correlation: np.ndarray | None = None
    correlation_names: tuple[str, ...] | None = None

    def to_json_dict(self) -> dict:
        sel = self.selection
        config_echo = self.config.to_json_dict()
        # execution knobs that cannot change results stay out of the report,
        # so runs at different thread counts compare byte-identical
        config_echo.pop("threads")
        config_echo.pop("out_dir")
        return {
            "schema": "bandsel-report/1",
            "seed": self.config.seed,
            "config": config_echo,
            "prepare": self.prepared,
            "windowing": sel.window_map.to_json_dict(),
            "rankings": {
                "feature_names": list(sel.feature_names),
                "rankers": {
                    name: [int(r) for r in vec.ranks]
                    for name, vec in sel.rank_vectors.items()
                },
                "full_ensemble": [int(r) for r in sel.full_ensemble.ranks],
            },
            "rre_windowed": sel.rre_windowed.to_json_dict(),
            "within_window": [
                {
                    "window": w.window_name,
                    "selected_wavelengths": w.selected_wavelengths,
                    "trace": None if w.trace is None else w.trace.to_json_dict(),
                    "band": w.band.to_json_dict(),
                }
                for w in sel.within
            ],
            "bands_initial": [b.to_json_dict() for b in sel.bands_initial],
            "bands": [
                {**b.to_json_dict(), "source_windows": list(b.source_windows)}
                for b in sel.bands
            ],
            "rre_bands": None if sel.rre_bands is None else sel.rre_bands.to_json_dict(),
            "final": {
                "selected_bands": list(self.evaluation.final_bands),
                "f1_mean_extreme": self.evaluation.f1_mean_extreme,
                "f1_std_extreme": self.evaluation.f1_std_extreme,
                "f1_moderate": self.evaluation.f1_moderate,
            },
            "comparison": [row.to_json_dict() for row in self.evaluation.comparison],
        }


def prepare(config: PipelineConfig) -> PreparedData:
    """Load or synthesize spectra, merge sensors, screen outliers, split classes."""
    if config.synth is not None:
        logger.info("generating synthetic dataset (seed=%d)", config.synth.seed)
        table, labels = generate(config.synth)
    elif config.spectra_csv is not None:
        table = load_spectra(config.spectra_csv)
        labels = load_labels(config.labels_csv)
    else:
        vis = load_spectra(config.vis_csv)
        nir = load_spectra(config.nir_csv)
        table = merge_sensors(vis, nir, *config.vis_clip)
        labels = load_labels(config.labels_csv)
    n_input = table.n_samples
    table, removed = remove_outliers(table, config.outlier_z)
    dataset = assign_classes(table, labels, config.thresholds)
    if np.unique(dataset.y_extreme).size < 2:
        raise ValidationError("extreme training split does not contain both classes")
    logger.info(
        "prepared %d samples: %d extreme / %d inner / %d excluded (%d outliers removed)",
        n_input,
        dataset.x_extreme.n_samples,
        dataset.x_inner.n_samples,
        dataset.n_excluded_middle,
        len(removed),
    )
    return PreparedData(dataset, n_input, removed)


def _ranking_stage(
    x_norm, y, names, config: PipelineConfig, stage: str,
    total_features: int | None = None,
):
    """Six rankings plus RRE for one feature space; degenerates cleanly at d=1."""
    if len(names) == 1:
        scorer = SubsetCvScorer(
            x_norm, y, folds=config.cv_folds,
            seed=seed_for(config.seed, stage, "cv"), shrinkage=config.shrinkage,
        )
        f1_mean, f1_std = scorer.score([0])
        total = total_features or 1
        only = SubsetEvaluation((names[0],), f1_mean, f1_std, fitness(f1_mean, 1, total))
        return None, None, None, only
    suite = build_ranker_suite(config.rankers, seed_for(config.seed, stage))
    vectors = rank_all(suite, x_norm, y, names, threads=config.threads)
    ensemble_vec = aggregate_ranks(list(vectors.values()))
    trace = recursive_ranker_elimination(
        vectors, x_norm, y,
        cv_seed=seed_for(config.seed, stage, "cv"),
        max_k=config.max_k, folds=config.cv_folds, shrinkage=config.shrinkage,
        total_features=total_features,
    )
    return vectors, ensemble_vec, trace, trace.winner


def select(config: PipelineConfig, prepared: PreparedData) -> SelectionResult:
    """Windowing, ranking and RRE, within-window selection, and band clustering."""
    ds = prepared.dataset
    y = ds.y_extreme
    x_raw = ds.x_extreme.reflectance
    wl = prepared.wavelengths

    logger.info("building correlation windows at rho=%.3f", config.correlation_threshold)
    corr = correlation_matrix(x_raw, [fmt_nm(w) for w in wl])
    window_map = build_windows(corr, wl, config.correlation_threshold)
    x_windowed = apply_windows(x_raw, window_map)
    names = window_map.feature_names
    logger.info("%d wavelengths -> %d windows", wl.shape[0], len(names))

    normalizer = fit_normalizer(x_windowed, names)
    x_norm = apply_normalizer(normalizer, x_windowed)

    vectors, full_ensemble, trace_w, _ = _ranking_stage(
        x_norm, y, names, config, "stage-windows"
    )
    if vectors is None:
        raise ValidationError("windowing produced a single feature; nothing to select")
    logger.info(
        "window stage winner: %d features from %s (fitness %.4f)",
        len(trace_w.winner.features), "+".join(trace_w.winner_members),
        trace_w.winner.fitness,
    )

    windows_by_name = {w.name: w for w in window_map.windows}
    winner_windows = [windows_by_name[n] for n in trace_w.winner.features]

    def run_window(window):
        selected, trace = within_window_selection(
            window, x_raw, wl, y,
            ranker_config=config.rankers, seed=config.seed,
            cv_folds=config.cv_folds, shrinkage=config.shrinkage, max_k=config.max_k,
        )
        band = cluster_band(
            selected, wl,
            allowed_widths=config.allowed_band_widths,
            source_windows=(window.name,),
        )
        return WithinWindowResult(window.name, selected, trace, band)

    if config.threads > 1 and len(winner_windows) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            futures = [pool.submit(run_window, w) for w in winner_windows]
            within = [f.result() for f in futures]
    else:
        within = [run_window(w) for w in winner_windows]
    for w in within:
        logger.info(
            "window %s -> band %s (%g nm nominal, %s-%s)",
            w.window_name, w.band.name, w.band.nominal_width_nm,
            fmt_nm(w.band.lo_nm), fmt_nm(w.band.hi_nm),
        )

    bands_initial = tuple(w.band for w in within)
    bands = resolve_overlaps(bands_initial, wl)

    x_bands, band_names = apply_band_windows(x_raw, bands, wl)
    band_normalizer = fit_normalizer(x_bands, band_names)
    x_bands_norm = apply_normalizer(band_normalizer, x_bands)

    # the clustered bands stand in for the window pool they came from, so
    # their smallness is still measured against that pool's size
    band_vectors, _, trace_b, winner_eval = _ranking_stage(
        x_bands_norm, y, band_names, config, "stage-bands",
        total_features=len(names),
    )
    winner_band_names = tuple(winner_eval.features)
    logger.info("final bands: %s", ", ".join(winner_band_names))

    return SelectionResult(
        window_map=window_map,
        feature_names=names,
        rank_vectors=vectors,
        full_ensemble=full_ensemble,
        rre_windowed=trace_w,
        within=within,
        bands_initial=bands_initial,
        bands=bands,
        band_feature_names=band_names,
        band_rank_vectors=band_vectors,
        rre_bands=trace_b,
        winner_band_names=winner_band_names,
        correlation=corr,
    )


def _moderate_f1(x_train, y_train, x_test, y_test, shrinkage: float) -> float | None:
    if x_test.shape[0] == 0 or np.unique(y_train).size < 2:
        return None
    model = QdaClassifier(shrinkage=shrinkage).fit(x_train, y_train)
    return weighted_f1(y_test, model.predict(x_test))


def evaluate(
    config: PipelineConfig, prepared: PreparedData, selection: SelectionResult
) -> EvaluationResult:
    """Score every method's chosen subset on train CV and on the inner test set."""
    ds = prepared.dataset
    y = ds.y_extreme
    wl = prepared.wavelengths

    x_windowed = apply_windows(ds.x_extreme.reflectance, selection.window_map, wl)
    names = selection.feature_names
    normalizer = fit_normalizer(x_windowed, names)
    x_norm = apply_normalizer(normalizer, x_windowed)
    x_inner = apply_windows(ds.x_inner.reflectance, selection.window_map, wl)
    x_inner_norm = apply_normalizer(normalizer, x_inner)

    x_bands, band_names = apply_band_windows(ds.x_extreme.reflectance, selection.bands, wl)
    band_normalizer = fit_normalizer(x_bands, band_names)
    x_bands_norm = apply_normalizer(band_normalizer, x_bands)
    x_bands_inner, _ = apply_band_windows(ds.x_inner.reflectance, selection.bands, wl)
    x_bands_inner_norm = apply_normalizer(band_normalizer, x_bands_inner)

    scorer = SubsetCvScorer(
        x_norm, y, folds=config.cv_folds,
        seed=seed_for(config.seed, "evaluate", "cv"), shrinkage=config.shrinkage,
    )
    band_scorer = SubsetCvScorer(
        x_bands_norm, y, folds=config.cv_folds,
        seed=seed_for(config.seed, "evaluate", "cv-bands"), shrinkage=config.shrinkage,
    )
    col_of = {name: i for i, name in enumerate(names)}
    band_col_of = {name: i for i, name in enumerate(band_names)}

    def window_row(method: str, features: tuple[str, ...]) -> ComparisonRow:
        idx = np.asarray([col_of[f] for f in features], dtype=int)
        f1_mean, f1_std = scorer.score(idx)
        moderate = _moderate_f1(
            x_norm[:, idx], y, x_inner_norm[:, idx], ds.y_inner, config.shrinkage
        )
        return ComparisonRow(method, len(features), features, f1_mean, f1_std, moderate)

    rows: list[ComparisonRow] = [window_row("None", names)]
    for method in ("SelectKBest", "SVM-RFE", "ReliefF", "Random Forest", "LASSO", "CCSA"):
        best = evaluate_nested_subsets(
            selection.rank_vectors[method], x_norm, y,
            max_k=config.max_k, scorer=scorer,
        )
        rows.append(window_row(method, best.features))
    ensemble_best = evaluate_nested_subsets(
        selection.full_ensemble, x_norm, y, max_k=config.max_k, scorer=scorer
    )
    rows.append(window_row("Full Ensemble", ensemble_best.features))
    rows.append(window_row("Recursive Ranker Elimination", selection.rre_windowed.winner.features))

    final_idx = np.asarray(
        [band_col_of[f] for f in selection.winner_band_names], dtype=int
    )
    final_mean, final_std = band_scorer.score(final_idx)
    final_moderate = _moderate_f1(
        x_bands_norm[:, final_idx], y,
        x_bands_inner_norm[:, final_idx], ds.y_inner, config.shrinkage,
    )
    rows.append(
        ComparisonRow(
            "Full Pipeline", final_idx.size, selection.winner_band_names,
            final_mean, final_std, final_moderate,
        )
    )
    assert tuple(r.method for r in rows) == COMPARISON_ORDER
    return EvaluationResult(
        final_bands=selection.winner_band_names,
        f1_mean_extreme=final_mean,
        f1_std_extreme=final_std,
        f1_moderate=final_moderate,
        comparison=rows,
    )


def run_full_pipeline(config: PipelineConfig) -> Report:
    prepared = prepare(config)
    selection = select(config, prepared)
    evaluation = evaluate(config, prepared, selection)
    return build_report(config, prepared, selection, evaluation)


def _csv_text(header: list[str], rows: list[list]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    text = str(value)
    if "," in text or '"' in text:
        text = '"' + text.replace('"', '""') + '"'
    return text


def _trace_rows(trace: EliminationTrace, extra: list | None = None) -> list[list]:
    rows = []
    for r in trace.rounds:
        rows.append(
            (extra or [])
            + [
                len(r.members),
                "{" + ", ".join(sorted(r.members)) + "}",
                len(r.best.features),
                r.best.f1_mean,
                r.best.f1_std,
                r.best.fitness,
            ]
        )
    return rows


_TRACE_HEADER = [
    "ensemble_size",
    "rankers_remaining",
    "subset_size",
    "f1_mean",
    "f1_std",
    "fitness",
]


def _bands_svg(bands, wl_lo: float, wl_hi: float) -> str:
    width, height, margin = 960, 180, 50
    axis_y = height - 40
    span = max(wl_hi - wl_lo, 1.0)

    def x_at(wl: float) -> float:
        return margin + (wl - wl_lo) / span * (width - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<line x1="{margin}" y1="{axis_y}" x2="{width - margin}" y2="{axis_y}" '
        'stroke="black" stroke-width="1"/>',
    ]
    n_ticks = 7
    for t in range(n_ticks):
        wl = wl_lo + span * t / (n_ticks - 1)
        x = x_at(wl)
        parts.append(
            f'<line x1="{x:.1f}" y1="{axis_y}" x2="{x:.1f}" y2="{axis_y + 6}" '
            'stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.1f}" y="{axis_y + 20}" font-size="11" '
            f'text-anchor="middle">{wl:.0f}</text>'
        )
    parts.append(
        f'<text x="{width / 2:.0f}" y="{height - 6}" font-size="12" '
        'text-anchor="middle">wavelength (nm)</text>'
    )
    for band in bands:
        x0, x1 = x_at(band.lo_nm), x_at(band.hi_nm)
        parts.append(
            f'<rect x="{x0:.1f}" y="40" width="{max(x1 - x0, 1.0):.1f}" '
            f'height="{axis_y - 40}" fill="#2b8a3e" fill-opacity="0.45"/>'
        )
        parts.append(
            f'<text x="{(x0 + x1) / 2:.1f}" y="32" font-size="11" '
            f'text-anchor="middle">{band.name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_artifacts(report: Report, out_dir) -> list[str]:
    """Write report.json plus the CSV/SVG exports; all writes are atomic."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name: str, text: str) -> None:
        atomic_write_text(out / name, text)
        written.append(name)

    emit("report.json", canonical_json(report.to_json_dict()) + "\n")

    sel = report.selection
    heat_header = ["ranker"] + list(sel.feature_names)
    heat_rows = [
        [name] + [int(r) for r in sel.rank_vectors[name].ranks] for name in RANKER_NAMES
    ]
    heat_rows.append(["Full Ensemble"] + [int(r) for r in sel.full_ensemble.ranks])
    emit("rankings_heatmap.csv", _csv_text(heat_header, heat_rows))

    if report.correlation is not None:
        names = list(report.correlation_names)
        lines = [",".join(names)]
        for row in report.correlation:
            lines.append(",".join(repr(float(v)) for v in row))
        emit("correlation_matrix.csv", "\n".join(lines) + "\n")

    emit("rre_windowed_features.csv", _csv_text(_TRACE_HEADER, _trace_rows(sel.rre_windowed)))
    within_rows = []
    for w in sel.within:
        if w.trace is not None:
            within_rows.extend(_trace_rows(w.trace, extra=[w.window_name]))
    emit(
        "rre_within_windows.csv",
        _csv_text(["window"] + _TRACE_HEADER, within_rows),
    )
    if sel.rre_bands is not None:
        emit("rre_clustered_bands.csv", _csv_text(_TRACE_HEADER, _trace_rows(sel.rre_bands)))

    window_by_name = {w.name: w for w in sel.window_map.windows}
    final_of_window = {}
    for band in sel.bands:
        for source in band.source_windows:
            final_of_window[source] = band
    w2b_rows = []
    for item in sel.within:
        window = window_by_name[item.window_name]
        band = final_of_window.get(item.window_name, item.band)
        w2b_rows.append(
            [
                window.name,
                f"{fmt_nm(window.first_nm)} - {fmt_nm(window.last_nm)}",
                window.width_nm,
                band.name,
                f"{fmt_nm(band.lo_nm)} - {fmt_nm(band.hi_nm)}",
                band.width_nm,
                band.nominal_width_nm,
            ]
        )
    emit(
        "window_to_band.csv",
        _csv_text(
            [
                "window_center",
                "window_range_nm",
                "window_bandwidth_nm",
                "band_center",
                "band_range_nm",
                "band_bandwidth_nm",
                "band_nominal_width_nm",
            ],
            w2b_rows,
        ),
    )

    emit(
        "method_comparison.csv",
        _csv_text(
            ["method", "subset_size", "f1_mean_extreme", "f1_std_extreme", "f1_moderate"],
            [
                [
                    row.method,
                    row.subset_size,
                    row.f1_mean_extreme,
                    row.f1_std_extreme,
                    "" if row.f1_moderate is None else row.f1_moderate,
                ]
                for row in report.evaluation.comparison
            ],
        ),
    )

    final_bands = [b for b in sel.bands if b.name in set(report.evaluation.final_bands)]
    emit(
        "bands.json",
        canonical_json([b.to_json_dict() for b in final_bands]) + "\n",
    )
    wl_lo = min((b.lo_nm for b in final_bands), default=400.0) - 50.0
    wl_hi = max((b.hi_nm for b in final_bands), default=1700.0) + 50.0
    emit("bands.svg", _bands_svg(final_bands, wl_lo, wl_hi))
    return written


# --- stage persistence for the resumable CLI -------------------------------


def save_prepared(prepared: PreparedData, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = prepared.dataset
    np.savez_compressed(
        out / "prepared.npz",
        wavelengths=prepared.wavelengths,
        x_extreme=ds.x_extreme.reflectance,
        y_extreme=ds.y_extreme,
        extreme_sample_ids=np.asarray(ds.x_extreme.sample_ids),
        extreme_vine_ids=np.asarray(ds.x_extreme.vine_ids),
        x_inner=ds.x_inner.reflectance,
        y_inner=ds.y_inner,
        inner_sample_ids=np.asarray(ds.x_inner.sample_ids),
        inner_vine_ids=np.asarray(ds.x_inner.vine_ids),
    )
    atomic_write_text(out / "prepared.json", canonical_json(prepared.summary()) + "\n")


def load_prepared(out_dir) -> PreparedData:
    path = Path(out_dir) / "prepared.npz"
    if not path.exists():
        raise ValidationError(f"{path} not found; run the prepare stage first")
    data = np.load(path, allow_pickle=False)
    summary = json.loads((Path(out_dir) / "prepared.json").read_text(encoding="utf-8"))
    wl = data["wavelengths"]
    dataset = LabeledDataset(
        x_extreme=SpectraTable(
            data["extreme_sample_ids"].tolist(),
            data["extreme_vine_ids"].tolist(),
            wl,
            data["x_extreme"],
        ),
        y_extreme=data["y_extreme"],
        x_inner=SpectraTable(
            data["inner_sample_ids"].tolist(),
            data["inner_vine_ids"].tolist(),
            wl,
            data["x_inner"],
        ),
        y_inner=data["y_inner"],
        n_excluded_middle=summary["n_excluded_middle"],
    )
    return PreparedData(
        dataset, summary["n_input_samples"], tuple(summary["removed_sample_ids"])
    )


def _rank_vectors_to_json(vectors, names) -> dict:
    return {name: [int(r) for r in vec.ranks] for name, vec in vectors.items()}


def save_selection(selection: SelectionResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = {
        "window_map": selection.window_map.to_json_dict(),
        "feature_names": list(selection.feature_names),
        "rank_vectors": _rank_vectors_to_json(selection.rank_vectors, selection.feature_names),
        "full_ensemble": [int(r) for r in selection.full_ensemble.ranks],
        "rre_windowed": selection.rre_windowed.to_json_dict(),
        "within": [
            {
                "window": w.window_name,
                "selected_wavelengths": w.selected_wavelengths,
                "trace": None if w.trace is None else w.trace.to_json_dict(),
                "band": _band_full_dict(w.band),
            }
            for w in selection.within
        ],
        "bands_initial": [_band_full_dict(b) for b in selection.bands_initial],
        "bands": [_band_full_dict(b) for b in selection.bands],
        "band_feature_names": list(selection.band_feature_names),
        "band_rank_vectors": None
        if selection.band_rank_vectors is None
        else _rank_vectors_to_json(selection.band_rank_vectors, selection.band_feature_names),
        "rre_bands": None
        if selection.rre_bands is None
        else selection.rre_bands.to_json_dict(),
        "winner_band_names": list(selection.winner_band_names),
    }
    atomic_write_text(out / "selection.json", canonical_json(data) + "\n")


def _band_full_dict(band: Band) -> dict:
    return {
        **band.to_json_dict(),
        "member_wavelengths": list(band.member_wavelengths),
        "source_windows": list(band.source_windows),
    }


def _band_from_dict(data: dict) -> Band:
    return Band(
        data["center"],
        data["nominal_width"],
        data["lo"],
        data["hi"],
        tuple(data["member_wavelengths"]),
        tuple(data["source_windows"]),
    )


def _trace_from_dict(data: dict) -> EliminationTrace:
    from .ensemble import RreRound

    rounds = tuple(
        RreRound(
            tuple(r["members"]),
            SubsetEvaluation(
                tuple(r["best"]["features"]),
                r["best"]["f1_mean"],
                r["best"]["f1_std"],
                r["best"]["fitness"],
            ),
            r["eliminated"],
        )
        for r in data["rounds"]
    )
    winner = SubsetEvaluation(
        tuple(data["winner"]["features"]),
        data["winner"]["f1_mean"],
        data["winner"]["f1_std"],
        data["winner"]["fitness"],
    )
    return EliminationTrace(
        rounds, tuple(data["winner_members"]), winner, data["n_evaluations"]
    )


def load_selection(out_dir) -> SelectionResult:
    path = Path(out_dir) / "selection.json"
    if not path.exists():
        raise ValidationError(f"{path} not found; run the select stage first")
    data = json.loads(path.read_text(encoding="utf-8"))
    names = tuple(data["feature_names"])
    band_names = tuple(data["band_feature_names"])
    vectors = {
        name: RankVector(names, np.asarray(ranks))
        for name, ranks in data["rank_vectors"].items()
    }
    band_vectors = data["band_rank_vectors"]
    return SelectionResult(
        window_map=WindowMap.from_json_dict(data["window_map"]),
        feature_names=names,
        rank_vectors=vectors,
        full_ensemble=RankVector(names, np.asarray(data["full_ensemble"])),
        rre_windowed=_trace_from_dict(data["rre_windowed"]),
        within=[
            WithinWindowResult(
                w["window"],
                list(w["selected_wavelengths"]),
                None if w["trace"] is None else _trace_from_dict(w["trace"]),
                _band_from_dict(w["band"]),
            )
            for w in data["within"]
        ],
        bands_initial=tuple(_band_from_dict(b) for b in data["bands_initial"]),
        bands=tuple(_band_from_dict(b) for b in data["bands"]),
        band_feature_names=band_names,
        band_rank_vectors=None
        if band_vectors is None
        else {
            name: RankVector(band_names, np.asarray(ranks))
            for name, ranks in band_vectors.items()
        },
        rre_bands=None if data["rre_bands"] is None else _trace_from_dict(data["rre_bands"]),
        winner_band_names=tuple(data["winner_band_names"]),
    )


def build_report(
    config: PipelineConfig,
    prepared: PreparedData,
    selection: SelectionResult,
    evaluation: EvaluationResult,
) -> Report:
    corr = selection.correlation
    if corr is None:
        corr = correlation_matrix(
            prepared.dataset.x_extreme.reflectance,
            [fmt_nm(w) for w in prepared.wavelengths],
        )
    return Report(
        config=config,
        prepared=prepared.summary(),
        selection=selection,
        evaluation=evaluation,
        correlation=corr,
        correlation_names=tuple(fmt_nm(w) for w in prepared.wavelengths),
    )
