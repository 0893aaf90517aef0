"""Shared fixtures: synthetic pools, a canonical TC1 split, small models."""

from __future__ import annotations

import numpy as np
import pytest

from plastiscan import (
    MODEL_SPECS,
    PLASTIC,
    RFHyperParams,
    SVMHyperParams,
    SynthConfig,
    TestCaseSpec,
    WATER,
    build_test_case,
    gen_dataset,
    split,
    train_rf,
    train_svm,
)
from plastiscan.dataset import Sample, SampleTable
from plastiscan.spectra import BAND_ORDER, FeatureSetSpec, PixelSpectrum

# Bands used (in order) when a test wants to inject a raw feature matrix.
FEATURE_BANDS = ("B2", "B3", "B4", "B5", "B6", "B7", "B8", "B8A", "B11", "B12")

assert FEATURE_BANDS == BAND_ORDER


def band_spec(n_features: int, spec_id: str = "bands") -> FeatureSetSpec:
    """A band-only feature set: training sees the injected columns verbatim."""
    return FeatureSetSpec(spec_id, FEATURE_BANDS[:n_features])


def table_from_features(X, labels, site: str = "t") -> SampleTable:
    """Wrap a plain feature matrix as a SampleTable over band-only columns.

    Column j becomes band FEATURE_BANDS[j]; row order carries (row=i, col=0)
    keys so the canonical ordering equals the input order.
    """
    X = np.asarray(X, dtype=np.float64)
    rows = []
    for i, (vec, label) in enumerate(zip(X, labels)):
        spectrum = PixelSpectrum(
            {FEATURE_BANDS[j]: float(v) for j, v in enumerate(vec)}
        )
        rows.append(
            Sample(
                site=site,
                date="2020-01-01",
                row=i,
                col=0,
                lat=None,
                lon=None,
                spectrum=spectrum,
                label=int(label),
            )
        )
    return SampleTable(rows=tuple(rows))


@pytest.fixture(scope="session")
def default_pool() -> SampleTable:
    return gen_dataset(SynthConfig(n_plastic=24, n_water=130, seed=7))


@pytest.fixture(scope="session")
def plastic_pool(default_pool) -> SampleTable:
    return default_pool.only(PLASTIC)


@pytest.fixture(scope="session")
def water_pool(default_pool) -> SampleTable:
    return default_pool.only(WATER)


@pytest.fixture(scope="session")
def tc1_split(plastic_pool, water_pool):
    table = build_test_case(plastic_pool, water_pool, TestCaseSpec("TC1"), seed=3)
    return split(table, 0.7, seed=5)


@pytest.fixture(scope="session")
def rf_small(tc1_split):
    hp = RFHyperParams(n_trees=40, mtry=2, seed=0)
    return train_rf(tc1_split.train, MODEL_SPECS["Model2"], hp)


@pytest.fixture(scope="session")
def svm_small(tc1_split):
    hp = SVMHyperParams(C=10.0, sigma=0.09, seed=0)
    return train_svm(tc1_split.train, MODEL_SPECS["Model2"], hp)
