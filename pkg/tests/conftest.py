import numpy as np
import pytest

from bandsel import (
    InformativeBand,
    PipelineConfig,
    RankerConfig,
    SensorGrid,
    SpectraTable,
    SynthConfig,
)


def small_synth_config(seed: int = 3) -> SynthConfig:
    return SynthConfig(
        n_vines=30,
        leaves_per_vine=5,
        sensor_grids=(SensorGrid(500.0, 580.0, 2.0), SensorGrid(900.0, 1020.0, 6.0)),
        informative_bands=(
            InformativeBand(540.0, 10.0, 0.1),
            InformativeBand(960.0, 12.0, 0.1),
        ),
        band_nuisance_sigma=0.025,
        seed=seed,
    )


def small_pipeline_config(seed: int = 5) -> PipelineConfig:
    return PipelineConfig(
        synth=small_synth_config(),
        rankers=RankerConfig(ccsa={"n_crows": 8, "n_iterations": 25, "cv_folds": 5}),
        cv_folds=5,
        seed=seed,
    )


@pytest.fixture
def small_config():
    return small_pipeline_config()


def make_table(reflectance, wavelengths, vine_ids=None, sample_ids=None) -> SpectraTable:
    reflectance = np.asarray(reflectance, dtype=float)
    n = reflectance.shape[0]
    sample_ids = sample_ids or [f"s{i}" for i in range(n)]
    vine_ids = vine_ids or [f"v{i}" for i in range(n)]
    return SpectraTable(sample_ids, vine_ids, np.asarray(wavelengths, float), reflectance)
