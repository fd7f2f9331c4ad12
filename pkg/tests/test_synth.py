import math

import numpy as np
import pytest

from gridreg.config import EngineConfig
from gridreg.errors import InputError, NoSolutionError
from gridreg.image import ImageBuffer
from gridreg.metrics import mee
from gridreg.synth import (
    LEVELS,
    DegradeOptions,
    make_textured_base,
    resample,
    rows_to_csv,
    run_benchmark,
    synth_pair,
)

BASE = make_textured_base(1024, seed=42)
NO_DEGRADE = DegradeOptions(speckle_looks=None)


class TestLevels:
    def test_table(self):
        assert LEVELS["L-1"] == ((0.6, 0.8), 4.0)
        assert LEVELS["L0"] == ((1.0, 1.0), 4.0)
        assert LEVELS["L1"] == ((1.0, 1.0), 9.0)
        assert LEVELS["L2"] == ((1.0, 1.0), 14.0)

    def test_unknown_level(self):
        with pytest.raises(InputError):
            synth_pair(BASE, "L7", 0)


class TestSynthPair:
    def test_deterministic(self):
        a = synth_pair(BASE, "L0", 3)
        b = synth_pair(BASE, "L0", 3)
        assert np.array_equal(a.source.data, b.source.data)
        assert np.array_equal(a.reference.data, b.reference.data)
        assert np.array_equal(a.t_gt.m, b.t_gt.m)

    def test_identity_rotation_draw_gives_pure_translation(self):
        # seed chosen so the rotation draw is 0 degrees with no flip
        for seed in range(50):
            case = synth_pair(BASE, "L0", seed, degrade=NO_DEGRADE)
            if case.degradations["rotation_deg"] == 0.0 and not case.degradations["flip"]:
                assert np.array_equal(case.t_gt.linear, np.eye(2))
                assert mee(case.t_gt, case.t_gt, case.source.dims, case.reference.dims) == 0.0
                return
        pytest.fail("no identity-rotation draw in 50 seeds")

    def test_l2_canvas_area(self):
        case = synth_pair(BASE, "L2", 1, degrade=NO_DEGRADE)
        side = case.reference.width
        assert case.reference.height == side
        assert abs(side - math.sqrt(14.0) * 400) <= 1.0

    def test_rso_and_roa_recorded_within_tolerance(self):
        for level, seed in (("L0", 2), ("L1", 3), ("L2", 4), ("L-1", 5)):
            case = synth_pair(BASE, level, seed, degrade=NO_DEGRADE)
            (roa_lo, roa_hi), rso = LEVELS[level]
            geo = case.degradations
            assert abs(geo["rso"] - rso) / rso <= 0.02
            assert roa_lo - 0.02 <= geo["roa"] <= roa_hi + 0.02

    def test_l_minus_1_hits_target_roa(self):
        case = synth_pair(BASE, "L-1", 7, degrade=NO_DEGRADE)
        geo = case.degradations
        assert geo["roa"] == pytest.approx(geo["roa_target"], abs=1e-6)
        assert 0.6 <= geo["roa_target"] <= 0.8

    def test_intensities_stay_in_range(self):
        case = synth_pair(BASE, "L0", 8, degrade=DegradeOptions(speckle_looks=4.0,
                                                                occlusion_rects=3))
        assert case.source.data.min() >= 0.0 and case.source.data.max() <= 1.0
        assert case.degradations["occlusion_rects"] == 3

    def test_speckle_changes_source_only(self):
        clean = synth_pair(BASE, "L0", 9, degrade=NO_DEGRADE)
        noisy = synth_pair(BASE, "L0", 9, degrade=DegradeOptions(speckle_looks=4.0))
        assert not np.array_equal(clean.source.data, noisy.source.data)
        assert np.array_equal(clean.reference.data, noisy.reference.data)
        assert np.array_equal(clean.t_gt.m, noisy.t_gt.m)

    def test_canvas_too_small(self):
        small = make_textured_base(256, seed=0)
        with pytest.raises(InputError):
            synth_pair(small, "L0", 0, source_size=400)

    def test_warp_roundtrip_error_small(self):
        case = synth_pair(BASE, "L0", 10, degrade=NO_DEGRADE)
        w, h = case.source.dims
        into_ref = resample(case.source, case.t_gt.inverse(), case.reference.dims)
        back = resample(into_ref, case.t_gt, (w, h))
        interior = back.data[10 : h - 10, 10 : w - 10]
        original = case.source.data[10 : h - 10, 10 : w - 10]
        assert np.abs(interior - original).mean() <= 0.02

    def test_ground_truth_maps_content(self):
        # sample a handful of source pixels and compare against the reference
        case = synth_pair(BASE, "L0", 11, degrade=NO_DEGRADE)
        rng = np.random.default_rng(0)
        pts = rng.uniform(20, 380, size=(50, 2))
        mapped = case.t_gt.apply(pts)
        src_vals = np.array(
            [case.source.data[int(round(y)), int(round(x))] for x, y in pts]
        )
        ref_vals = np.array(
            [case.reference.data[int(round(y)), int(round(x))] for x, y in mapped]
        )
        # bilinear + rounding noise only
        assert np.abs(src_vals - ref_vals).mean() <= 0.05


class TestRunBenchmark:
    def test_empty_case_list(self):
        assert run_benchmark([], EngineConfig()) == []

    def test_rows_and_determinism(self):
        base = make_textured_base(768, seed=1)
        cases = [synth_pair(base, "L0", s, source_size=320) for s in range(2)]
        cfg = EngineConfig(iter_cap=3000, seed=0)
        rows_a = run_benchmark(cases, cfg)
        rows_b = run_benchmark(cases, cfg)
        assert rows_a == rows_b
        csv_a = rows_to_csv(rows_a)
        assert csv_a == rows_to_csv(rows_b)
        assert csv_a.startswith(
            "case_id,level,seed,mee_px,success25,success50,success75,success100,wall_ms\n"
        )
        assert csv_a.count("\n") == 3

    def test_solver_failure_records_inf(self, monkeypatch):
        import gridreg.synth as synth_mod

        def boom(*args, **kwargs):
            raise NoSolutionError("forced")

        monkeypatch.setattr(synth_mod, "solve", boom)
        base = make_textured_base(768, seed=2)
        cases = [synth_pair(base, "L0", 0, source_size=320)]
        rows = run_benchmark(cases, EngineConfig(iter_cap=100))
        assert math.isinf(rows[0]["mee_px"])
        assert rows[0]["success25"] == 0
        assert "inf" in rows_to_csv(rows)

    def test_success_flags_follow_mee(self):
        base = make_textured_base(768, seed=3)
        cases = [synth_pair(base, "L0", 1, source_size=320)]
        rows = run_benchmark(cases, EngineConfig(iter_cap=3000, seed=0))
        row = rows[0]
        for th in (25, 50, 75, 100):
            assert row[f"success{th}"] == int(row["mee_px"] <= th)


class TestTexturedBase:
    def test_range_and_determinism(self):
        a = make_textured_base(128, seed=5)
        b = make_textured_base(128, seed=5)
        assert np.array_equal(a.data, b.data)
        assert a.data.min() >= 0.0 and a.data.max() <= 1.0
        assert a.data.std() > 0.05  # actually textured

    def test_resample_identity(self):
        img = make_textured_base(64, seed=6)
        from gridreg.transform import AffineTransform2D

        out = resample(img, AffineTransform2D.identity(), img.dims)
        assert np.allclose(out.data, img.data, atol=1e-12)
