"""Spectral-mixing generator: endmembers, pools, and scenes."""

from __future__ import annotations

import json
import warnings

import numpy as np
import pytest

from plastiscan import PLASTIC, WATER, SynthConfig, gen_dataset, gen_scene
from plastiscan.errors import (
    DataError,
    InvalidSampleError,
    MissingBandError,
    PatchOutOfBoundsError,
)
from plastiscan.synth import (
    DEFAULT_FRACTIONS,
    Endmember,
    PatchSpec,
    default_endmembers,
    load_endmembers,
    mix_pixel,
)


def plastic_member(**overrides) -> Endmember:
    bands = {"B4": 0.10, "B6": 0.10, "B8": 0.50, "B11": 0.05}
    bands.update(overrides)
    return Endmember("plastic_bottle", bands)


def water_member(**overrides) -> Endmember:
    bands = {"B3": 0.05, "B4": 0.03, "B6": 0.025, "B8": 0.02, "B11": 0.003}
    bands.update(overrides)
    return Endmember("water", bands)


class TestEndmember:
    def test_bands_follow_registry_order(self):
        member = Endmember(
            "plastic_bag", {"B11": 0.05, "B8": 0.5, "B4": 0.1, "B6": 0.1}
        )
        assert member.bands == ("B4", "B6", "B8", "B11")

    def test_unknown_band_rejected(self):
        with pytest.raises(MissingBandError, match="B99"):
            plastic_member(B99=0.1)

    @pytest.mark.parametrize("missing", ["B4", "B6", "B8", "B11"])
    def test_core_band_required(self, missing):
        bands = {"B4": 0.1, "B6": 0.1, "B8": 0.5, "B11": 0.05}
        bands.pop(missing)
        with pytest.raises(MissingBandError, match=missing):
            Endmember("plastic_bottle", bands)

    def test_water_needs_green_band(self):
        with pytest.raises(MissingBandError, match="B3"):
            Endmember("water", {"B4": 0.03, "B6": 0.025, "B8": 0.02, "B11": 0.003})

    def test_water_must_absorb_nir(self):
        with pytest.raises(InvalidSampleError, match="B8 < B3"):
            water_member(B8=0.06)

    def test_plastic_needs_nir_peak(self):
        with pytest.raises(InvalidSampleError, match="B8 > B4"):
            plastic_member(B8=0.08)

    def test_negative_reflectance_rejected(self):
        with pytest.raises(InvalidSampleError, match="B4"):
            plastic_member(B4=-0.01)

    def test_empty_name_rejected(self):
        with pytest.raises(ValueError, match="name"):
            Endmember("", {"B4": 0.1, "B6": 0.1, "B8": 0.5, "B11": 0.05})


class TestEndmemberTables:
    def test_packaged_defaults(self):
        members = default_endmembers()
        assert "water" in members
        assert len(members) >= 2
        for member in members.values():
            assert set(("B4", "B6", "B8", "B11")) <= set(member.bands)

    def test_load_round_trip(self, tmp_path):
        doc = {
            "endmembers": {
                "water": dict(water_member().reflectance),
                "plastic_bottle": dict(plastic_member().reflectance),
            }
        }
        path = tmp_path / "members.json"
        path.write_text(json.dumps(doc))
        members = load_endmembers(path)
        assert set(members) == {"water", "plastic_bottle"}
        assert members["plastic_bottle"].reflectance["B8"] == 0.5

    def test_load_missing_table(self, tmp_path):
        path = tmp_path / "members.json"
        path.write_text(json.dumps({"foo": 1}))
        with pytest.raises(DataError, match="endmembers"):
            load_endmembers(path)

    def test_load_needs_water(self, tmp_path):
        path = tmp_path / "members.json"
        path.write_text(json.dumps(
            {"endmembers": {"plastic_bottle": dict(plastic_member().reflectance)}}
        ))
        with pytest.raises(DataError, match="water"):
            load_endmembers(path)

    def test_load_needs_a_plastic(self, tmp_path):
        path = tmp_path / "members.json"
        path.write_text(json.dumps(
            {"endmembers": {"water": dict(water_member().reflectance)}}
        ))
        with pytest.raises(DataError, match="plastic"):
            load_endmembers(path)


class TestMixPixel:
    def test_fraction_zero_is_water(self):
        out = mix_pixel(plastic_member(), water_member(), 0.0, 0.0, seed=1)
        for band_id, value in out.reflectance.items():
            assert value == water_member().reflectance[band_id]

    def test_fraction_one_is_plastic(self):
        out = mix_pixel(plastic_member(), water_member(), 1.0, 0.0, seed=1)
        for band_id, value in out.reflectance.items():
            assert value == plastic_member().reflectance[band_id]

    def test_midpoint_arithmetic(self):
        out = mix_pixel(plastic_member(), water_member(), 0.5, 0.0, seed=1)
        assert out.band("B8") == pytest.approx(0.26)

    def test_affine_in_fraction(self):
        plastic, water = plastic_member(), water_member()
        mid = mix_pixel(plastic, water, 0.5, 0.0, seed=1)
        for f in (0.1, 0.25, 0.4):
            lo = mix_pixel(plastic, water, f, 0.0, seed=1)
            hi = mix_pixel(plastic, water, 1.0 - f, 0.0, seed=1)
            for band_id in mid.reflectance:
                average = (lo.band(band_id) + hi.band(band_id)) / 2.0
                assert average == pytest.approx(mid.band(band_id), abs=1e-15)

    def test_only_shared_bands_mix(self):
        out = mix_pixel(plastic_member(), water_member(), 0.5, 0.0, seed=1)
        assert "B3" not in out.reflectance  # water-only band
        assert set(out.reflectance) == {"B4", "B6", "B8", "B11"}

    def test_noise_clips_below_zero_only(self):
        saw_above_one = False
        for seed in range(40):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # wild values trip plausibility
                out = mix_pixel(plastic_member(), water_member(), 0.5, 10.0, seed=seed)
            values = list(out.reflectance.values())
            assert min(values) >= 0.0
            saw_above_one = saw_above_one or max(values) > 1.0
        assert saw_above_one

    def test_deterministic_under_seed(self):
        a = mix_pixel(plastic_member(), water_member(), 0.3, 0.01, seed=7)
        b = mix_pixel(plastic_member(), water_member(), 0.3, 0.01, seed=7)
        c = mix_pixel(plastic_member(), water_member(), 0.3, 0.01, seed=8)
        assert a.reflectance == b.reflectance
        assert a.reflectance != c.reflectance

    @pytest.mark.parametrize("fraction", [-0.01, 1.01])
    def test_fraction_bounds(self, fraction):
        with pytest.raises(ValueError, match="fraction"):
            mix_pixel(plastic_member(), water_member(), fraction, 0.0, seed=1)

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError, match="noise"):
            mix_pixel(plastic_member(), water_member(), 0.5, -0.1, seed=1)


class TestSynthConfig:
    def test_negative_counts(self):
        with pytest.raises(ValueError, match="counts"):
            SynthConfig(n_plastic=-1, n_water=1, seed=0)

    def test_negative_noise(self):
        with pytest.raises(ValueError, match="noise"):
            SynthConfig(n_plastic=1, n_water=1, seed=0, noise_sd=-0.1)

    def test_unknown_category(self):
        with pytest.raises(ValueError, match="41-50%"):
            SynthConfig(
                n_plastic=1, n_water=1, seed=0,
                fraction_distribution={"41-50%": 1.0},
            )

    def test_distribution_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum to 1"):
            SynthConfig(
                n_plastic=1, n_water=1, seed=0,
                fraction_distribution={">40%": 0.5},
            )

    def test_negative_probability(self):
        with pytest.raises(ValueError, match="non-negative"):
            SynthConfig(
                n_plastic=1, n_water=1, seed=0,
                fraction_distribution={">40%": 1.5, "0-10%": -0.5},
            )

    def test_endmembers_need_water(self):
        with pytest.raises(DataError, match="water"):
            SynthConfig(
                n_plastic=1, n_water=1, seed=0,
                endmembers={"plastic_bottle": plastic_member()},
            )

    def test_plastic_names_sorted_without_water(self):
        config = SynthConfig(n_plastic=1, n_water=1, seed=0)
        assert config.plastic_names == tuple(sorted(config.plastic_names))
        assert "water" not in config.plastic_names

    def test_default_distribution_uniform(self):
        assert set(DEFAULT_FRACTIONS.values()) == {0.2}


class TestGenDataset:
    def test_counts_match_config(self):
        table = gen_dataset(SynthConfig(n_plastic=54, n_water=270, seed=0))
        assert len(table) == 324
        assert table.count(PLASTIC) == 54
        assert table.count(WATER) == 270

    def test_fractions_respect_distribution(self):
        config = SynthConfig(
            n_plastic=30, n_water=1, seed=3,
            fraction_distribution={">40%": 1.0},
        )
        for sample in gen_dataset(config).only(PLASTIC):
            assert sample.plastic_fraction is not None
            assert 40.0 <= sample.plastic_fraction <= 100.0

    def test_water_rows_have_no_fraction(self):
        table = gen_dataset(SynthConfig(n_plastic=2, n_water=5, seed=1))
        assert all(s.plastic_fraction is None for s in table.only(WATER))

    def test_deterministic_under_seed(self):
        config = SynthConfig(n_plastic=6, n_water=9, seed=11)
        a, b = gen_dataset(config), gen_dataset(config)
        for sa, sb in zip(a, b):
            assert sa.key() == sb.key()
            assert sa.spectrum.reflectance == sb.spectrum.reflectance
            assert sa.plastic_fraction == sb.plastic_fraction
        c = gen_dataset(SynthConfig(n_plastic=6, n_water=9, seed=12))
        assert any(
            sa.spectrum.reflectance != sc.spectrum.reflectance
            for sa, sc in zip(a, c)
        )

    def test_noiseless_high_coverage_orders_nir(self):
        config = SynthConfig(
            n_plastic=20, n_water=20, seed=5, noise_sd=0.0,
            fraction_distribution={">40%": 1.0},
        )
        table = gen_dataset(config)
        plastic_b8 = [s.spectrum.band("B8") for s in table.only(PLASTIC)]
        water_b8 = [s.spectrum.band("B8") for s in table.only(WATER)]
        assert min(plastic_b8) > max(water_b8)


class TestPatchSpec:
    def test_nonpositive_size(self):
        with pytest.raises(ValueError, match="height/width"):
            PatchSpec(row=0, col=0, height=0, width=3, fraction=1.0)

    def test_negative_origin(self):
        with pytest.raises(PatchOutOfBoundsError):
            PatchSpec(row=-1, col=0, height=1, width=1, fraction=1.0)

    @pytest.mark.parametrize("fraction", [0.0, 1.01])
    def test_fraction_bounds(self, fraction):
        with pytest.raises(ValueError, match="fraction"):
            PatchSpec(row=0, col=0, height=1, width=1, fraction=fraction)


class TestGenScene:
    def test_zero_patches_is_all_water(self):
        config = SynthConfig(n_plastic=1, n_water=1, seed=0, noise_sd=0.0)
        stack, truth = gen_scene(config, width=4, height=3)
        assert (truth.labels == WATER).all()
        water = config.endmembers["water"]
        assert stack.band_ids == water.bands
        for band_id in stack.band_ids:
            assert (stack.band(band_id).values == water.reflectance[band_id]).all()

    def test_three_by_ten_patch_has_thirty_plastic_cells(self):
        config = SynthConfig(n_plastic=1, n_water=1, seed=0)
        patch = PatchSpec(row=2, col=1, height=3, width=10, fraction=0.9)
        _, truth = gen_scene(config, width=16, height=8, patches=(patch,))
        assert int((truth.labels == PLASTIC).sum()) == 30
        assert (truth.labels[2:5, 1:11] == PLASTIC).all()

    def test_full_fraction_patch_reproduces_endmember(self):
        config = SynthConfig(n_plastic=1, n_water=1, seed=0, noise_sd=0.0)
        patch = PatchSpec(row=0, col=0, height=2, width=2, fraction=1.0,
                          endmember="plastic_bag")
        stack, _ = gen_scene(config, width=4, height=4, patches=(patch,))
        member = config.endmembers["plastic_bag"]
        for band_id in stack.band_ids:
            assert (stack.band(band_id).values[:2, :2]
                    == member.reflectance[band_id]).all()

    def test_resolution_is_finest_native(self):
        config = SynthConfig(n_plastic=1, n_water=1, seed=0)
        stack, _ = gen_scene(config, width=2, height=2)
        assert stack.resolution_m == 10.0

    def test_deterministic_under_seed(self):
        config = SynthConfig(n_plastic=1, n_water=1, seed=9)
        patch = PatchSpec(row=1, col=1, height=2, width=2, fraction=0.8)
        a, _ = gen_scene(config, width=5, height=5, patches=(patch,))
        b, _ = gen_scene(config, width=5, height=5, patches=(patch,))
        for band_id in a.band_ids:
            np.testing.assert_array_equal(
                a.band(band_id).values, b.band(band_id).values
            )

    def test_patch_beyond_bounds(self):
        config = SynthConfig(n_plastic=1, n_water=1, seed=0)
        patch = PatchSpec(row=6, col=0, height=3, width=10, fraction=0.9)
        with pytest.raises(PatchOutOfBoundsError, match="exceeds"):
            gen_scene(config, width=16, height=8, patches=(patch,))

    def test_unknown_patch_endmember(self):
        config = SynthConfig(n_plastic=1, n_water=1, seed=0)
        patch = PatchSpec(row=0, col=0, height=1, width=1, fraction=0.9,
                          endmember="styrofoam")
        with pytest.raises(DataError, match="styrofoam"):
            gen_scene(config, width=4, height=4, patches=(patch,))

    def test_water_patch_endmember_rejected(self):
        config = SynthConfig(n_plastic=1, n_water=1, seed=0)
        patch = PatchSpec(row=0, col=0, height=1, width=1, fraction=0.9,
                          endmember="water")
        with pytest.raises(DataError):
            gen_scene(config, width=4, height=4, patches=(patch,))

    def test_nonpositive_scene_dimensions(self):
        config = SynthConfig(n_plastic=1, n_water=1, seed=0)
        with pytest.raises(ValueError, match="dimensions"):
            gen_scene(config, width=0, height=3)
