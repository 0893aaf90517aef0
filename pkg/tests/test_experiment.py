"""Experiment matrix orchestration, CSV/text export, scene classification."""

from __future__ import annotations

import csv

import numpy as np
import pytest

from plastiscan import (
    ExperimentMatrix,
    Grid,
    GridSpec,
    MaskGrid,
    MatrixCell,
    PLASTIC,
    PatchSpec,
    RFHyperParams,
    SynthConfig,
    WATER,
    apply_mask,
    classify_scene,
    export_matrix,
    gen_dataset,
    gen_scene,
    predict_rf,
    predict_rf_batch,
    predict_svm_batch,
    render_matrix_text,
    run_cell,
    run_matrix,
    train_rf,
    train_svm,
)
from plastiscan.dataset import TEST_CASES
from plastiscan.experiment import ALGOS, MODEL_IDS
from plastiscan.classifiers.svm import SVMHyperParams
from plastiscan.errors import MissingBandError
from plastiscan.metrics import METRIC_KEYS, NotAValue
from plastiscan.raster import BandStack
from plastiscan.spectra import MODEL_SPECS, PixelSpectrum, feature_vector

from conftest import band_spec, table_from_features

QUICK_GRID = GridSpec(mtry_grid=(2,), sigma_grid=(0.09,), c_grid=(10.0,), cv_folds=2)
RF_BASE = RFHyperParams(n_trees=10, mtry=2)


@pytest.fixture(scope="module")
def pools():
    table = gen_dataset(SynthConfig(n_plastic=12, n_water=64, seed=11))
    return table.only(PLASTIC), table.only(WATER)


@pytest.fixture(scope="module")
def matrix50(pools):
    plastic, water = pools
    return run_matrix(plastic, water, QUICK_GRID, master_seed=42, rf_base=RF_BASE)


def stack_of(**bands):
    grids = {}
    for band_id, rows in bands.items():
        values = np.asarray(rows, dtype=np.float64)
        grids[band_id] = Grid(width=values.shape[1], height=values.shape[0],
                              values=values)
    return BandStack(grids=grids, resolution_m=10.0)


class TestRunCell:
    def test_deterministic(self, pools):
        plastic, water = pools
        kwargs = dict(model_id="Model2", test_case_id="TC2", algo="rf",
                      grid=QUICK_GRID, master_seed=9, rf_base=RF_BASE)
        assert run_cell(plastic, water, **kwargs) == run_cell(plastic, water, **kwargs)

    @pytest.mark.parametrize("case", TEST_CASES)
    def test_sample_accounting(self, pools, case):
        plastic, water = pools
        cell = run_cell(plastic, water, "Model4", case.case_id, "rf",
                        QUICK_GRID, master_seed=3, rf_base=RF_BASE)
        assert cell.error is None
        expected_total = 12 + 12 * case.water_multiplier
        assert cell.n_train + cell.n_test == expected_total
        assert cell.cm.tp + cell.cm.fn + cell.cm.fp + cell.cm.tn == cell.n_test

    def test_tuned_fields_per_algo(self, pools):
        plastic, water = pools
        rf = run_cell(plastic, water, "Model1", "TC1", "rf",
                      QUICK_GRID, master_seed=1, rf_base=RF_BASE)
        svm = run_cell(plastic, water, "Model1", "TC1", "svm",
                       QUICK_GRID, master_seed=1)
        assert set(rf.tuned) == {"mtry", "n_trees"}
        assert rf.tuned["mtry"] == 2
        assert set(svm.tuned) == {"C", "sigma"}
        assert svm.tuned == {"C": 10.0, "sigma": 0.09}

    def test_data_error_recorded_not_raised(self, pools):
        plastic, _ = pools
        tiny_water = gen_dataset(SynthConfig(n_plastic=2, n_water=20, seed=1)).only(WATER)
        cell = run_cell(plastic, tiny_water, "Model1", "TC5", "rf",
                        QUICK_GRID, master_seed=0, rf_base=RF_BASE)
        assert cell.report is None and cell.cm is None
        assert "InsufficientWaterPoolError" in cell.error
        assert cell.tuned == {}

    def test_tuned_mapping_is_copied(self):
        tuned = {"mtry": 1}
        cell = MatrixCell(model_id="Model1", test_case_id="TC1", algo="rf",
                          tuned=tuned, report=None, cm=None,
                          n_train=0, n_test=0, error="x")
        tuned["mtry"] = 99
        assert cell.tuned == {"mtry": 1}


class TestRunMatrix:
    def test_fifty_cells_in_model_major_order(self, matrix50):
        assert isinstance(matrix50, ExperimentMatrix)
        assert len(matrix50.cells) == 50
        coords = [(c.model_id, c.test_case_id, c.algo) for c in matrix50.cells]
        expected = [(m, t.case_id, a)
                    for m in MODEL_IDS for t in TEST_CASES for a in ALGOS]
        assert coords == expected
        assert all(c.error is None for c in matrix50.cells)

    def test_sub_matrix_cells_match_full_run(self, pools, matrix50):
        plastic, water = pools
        sub = run_matrix(plastic, water, QUICK_GRID, master_seed=42,
                         rf_base=RF_BASE, model_ids=("Model3",),
                         test_case_ids=("TC4",))
        assert len(sub.cells) == 2
        full = {(c.model_id, c.test_case_id, c.algo): c for c in matrix50.cells}
        for cell in sub.cells:
            assert cell == full[(cell.model_id, cell.test_case_id, cell.algo)]

    def test_repeat_run_identical(self, pools, matrix50):
        plastic, water = pools
        again = run_matrix(plastic, water, QUICK_GRID, master_seed=42,
                           rf_base=RF_BASE)
        assert again == matrix50

    def test_parallel_matches_serial(self, pools, matrix50, tmp_path):
        plastic, water = pools
        parallel = run_matrix(plastic, water, QUICK_GRID, master_seed=42,
                              rf_base=RF_BASE, jobs=2)
        assert parallel == matrix50
        a, b = tmp_path / "serial.csv", tmp_path / "parallel.csv"
        export_matrix(matrix50, a)
        export_matrix(parallel, b)
        assert a.read_bytes() == b.read_bytes()

    def test_master_seed_changes_results(self):
        # overlapping classes: the seed-dependent partition shows in the counts
        table = gen_dataset(SynthConfig(n_plastic=12, n_water=40, seed=11,
                                        noise_sd=0.02,
                                        fraction_distribution={"0-10%": 1.0}))
        plastic, water = table.only(PLASTIC), table.only(WATER)
        a = run_matrix(plastic, water, QUICK_GRID, master_seed=1,
                       rf_base=RF_BASE, model_ids=("Model2",),
                       test_case_ids=("TC3",))
        b = run_matrix(plastic, water, QUICK_GRID, master_seed=2,
                       rf_base=RF_BASE, model_ids=("Model2",),
                       test_case_ids=("TC3",))
        assert any(x.cm != y.cm for x, y in zip(a.cells, b.cells))

    @pytest.mark.parametrize(
        "kwargs, match",
        [(dict(model_ids=("Model9",)), "feature set"),
         (dict(test_case_ids=("TC9",)), "test case"),
         (dict(jobs=0), "jobs")],
    )
    def test_validation(self, pools, kwargs, match):
        plastic, water = pools
        with pytest.raises(ValueError, match=match):
            run_matrix(plastic, water, QUICK_GRID, master_seed=0, **kwargs)


class TestExport:
    def test_csv_layout_and_round_trip(self, matrix50, tmp_path):
        path = tmp_path / "matrix.csv"
        export_matrix(matrix50, path)
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["model", "test_case", "algo", "metric", "value", "error"]
        assert len(rows) == 1 + 50 * len(METRIC_KEYS)
        by_key = {(c.model_id, c.test_case_id, c.algo): c for c in matrix50.cells}
        for model, case, algo, metric, value, error in rows[1:]:
            cell = by_key[(model, case, algo)]
            stored = getattr(cell.report, metric)
            if value == "NA":
                assert isinstance(stored, NotAValue)
            else:
                assert float(value) == stored
                assert error == ""

    def test_metric_rows_grouped_per_cell(self, matrix50, tmp_path):
        path = tmp_path / "matrix.csv"
        export_matrix(matrix50, path)
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        metrics = [r[3] for r in rows[1:]]
        assert metrics == list(METRIC_KEYS) * 50

    def test_failed_cell_rows(self, pools, tmp_path):
        plastic, _ = pools
        tiny_water = gen_dataset(SynthConfig(n_plastic=2, n_water=8, seed=2)).only(WATER)
        matrix = run_matrix(plastic, tiny_water, QUICK_GRID, master_seed=0,
                            rf_base=RF_BASE, model_ids=("Model1",),
                            test_case_ids=("TC5",))
        path = tmp_path / "failed.csv"
        export_matrix(matrix, str(path))
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        assert len(rows) == 2 * len(METRIC_KEYS)
        for row in rows:
            assert row[4] == "NA"
            assert "InsufficientWaterPoolError" in row[5]


class TestRenderText:
    def test_blocks_columns_and_tuning_lines(self, matrix50):
        text = render_matrix_text(matrix50)
        for model_id in MODEL_IDS:
            assert f"== {model_id} ==" in text
        assert "TC1/svm" in text and "TC5/rf" in text
        assert "tuned:" in text
        assert text.endswith("\n")

    def test_failed_cells_marked(self, pools):
        plastic, _ = pools
        tiny_water = gen_dataset(SynthConfig(n_plastic=2, n_water=8, seed=2)).only(WATER)
        matrix = run_matrix(plastic, tiny_water, QUICK_GRID, master_seed=0,
                            rf_base=RF_BASE, model_ids=("Model2",),
                            test_case_ids=("TC5",))
        text = render_matrix_text(matrix)
        assert "ERR" in text
        assert "failed: InsufficientWaterPoolError" in text

    def test_sub_matrix_renders_only_present_columns(self, pools):
        plastic, water = pools
        matrix = run_matrix(plastic, water, QUICK_GRID, master_seed=1,
                            rf_base=RF_BASE, model_ids=("Model4",),
                            test_case_ids=("TC2",))
        text = render_matrix_text(matrix)
        assert "== Model4 ==" in text and "== Model1 ==" not in text
        assert "TC2/svm" in text and "TC1/svm" not in text


@pytest.fixture(scope="module")
def scene_model():
    config = SynthConfig(n_plastic=20, n_water=40, seed=5,
                         fraction_distribution={">40%": 1.0})
    table = gen_dataset(config)
    model = train_rf(table, MODEL_SPECS["Model4"],
                     RFHyperParams(n_trees=30, mtry=2, seed=0))
    return config, model


class TestClassifyScene:
    def test_matches_per_pixel_scalar_pipeline(self, scene_model):
        config, model = scene_model
        scene_config = SynthConfig(n_plastic=20, n_water=40, seed=6,
                                   fraction_distribution={">40%": 1.0})
        stack, _ = gen_scene(scene_config, width=6, height=5,
                             patches=(PatchSpec(row=1, col=2, height=2, width=2,
                                                fraction=0.9),))
        labels = classify_scene(stack, model)
        assert labels.width == 6 and labels.height == 5
        for r in range(5):
            for c in range(6):
                pixel = PixelSpectrum(
                    {bid: float(stack.grids[bid].values[r, c])
                     for bid in ("B4", "B6", "B8", "B11")})
                fv = feature_vector(pixel, model.spec)
                assert labels.labels[r, c] == predict_rf(model, fv)

    def test_single_pixel_scene(self, scene_model):
        config, model = scene_model
        stack, _ = gen_scene(
            SynthConfig(n_plastic=2, n_water=2, seed=9), width=1, height=1)
        labels = classify_scene(stack, model)
        pixel = PixelSpectrum({bid: float(stack.grids[bid].values[0, 0])
                               for bid in ("B4", "B6", "B8", "B11")})
        assert labels.labels[0, 0] == predict_rf(model, feature_vector(pixel, model.spec))

    def test_fully_masked_scene_is_all_nodata(self, scene_model):
        config, model = scene_model
        stack, _ = gen_scene(
            SynthConfig(n_plastic=2, n_water=2, seed=9), width=4, height=3)
        blanked = apply_mask(stack, MaskGrid(width=4, height=3,
                                             keep=np.zeros((3, 4), dtype=bool)))
        labels = classify_scene(blanked, model)
        assert (labels.labels == 0).all()

    def test_degenerate_index_pixel_gets_nodata(self, scene_model):
        _, model = scene_model
        b4 = [[0.1, 0.0]]
        b6 = [[0.08, 0.08]]
        b8 = [[0.3, 0.0]]
        b11 = [[0.02, 0.02]]
        stack = stack_of(B4=b4, B6=b6, B8=b8, B11=b11)
        labels = classify_scene(stack, model)
        assert labels.labels[0, 1] == 0
        assert labels.labels[0, 0] in (PLASTIC, WATER)

    def test_missing_band_named(self, scene_model):
        _, model = scene_model
        stack = stack_of(B4=[[0.1]], B6=[[0.08]], B8=[[0.3]])
        with pytest.raises(MissingBandError, match="B11"):
            classify_scene(stack, model)

    def test_raw_band_features(self):
        rng = np.random.default_rng(3)
        y = np.array([PLASTIC, WATER] * 10)
        X = np.where(y[:, None] == PLASTIC, 0.8, 0.2) + rng.normal(0, 0.05, (20, 2))
        model = train_svm(table_from_features(X, y), band_spec(2),
                          SVMHyperParams())
        b2 = rng.uniform(0.1, 0.9, (3, 4))
        b3 = rng.uniform(0.1, 0.9, (3, 4))
        stack = stack_of(B2=b2, B3=b3)
        labels = classify_scene(stack, model)
        flat = predict_svm_batch(model, np.column_stack([b2.reshape(-1),
                                                         b3.reshape(-1)]))
        np.testing.assert_array_equal(labels.labels.reshape(-1), flat)

    def test_cropped_scene_matches_full_classification(self, scene_model):
        _, model = scene_model
        stack, _ = gen_scene(
            SynthConfig(n_plastic=4, n_water=4, seed=13), width=6, height=4,
            patches=(PatchSpec(row=0, col=0, height=2, width=3, fraction=1.0),))
        full = classify_scene(stack, model)
        cropped_grids = {
            bid: Grid(width=2, height=3, values=g.values[1:4, 2:4].copy())
            for bid, g in stack.grids.items()
        }
        crop = BandStack(grids=cropped_grids, resolution_m=stack.resolution_m)
        np.testing.assert_array_equal(
            classify_scene(crop, model).labels, full.labels[1:4, 2:4])
