import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from corrdyn.core import CorrespondenceParams
from corrdyn.errors import BudgetError, InvalidArgumentError
from corrdyn.orbits import OrbitConfig, membership_depths
from corrdyn.region import Region
from corrdyn.render import (
    DepthGrid,
    RenderSpec,
    chaos_game,
    default_threads,
    gray_levels,
    inverse_tree_levels,
    pgm_bytes,
    render_julia_escape,
    render_julia_inverse,
    render_multibrot,
    row_bands,
    write_outputs,
    write_pgm,
)

GOLDEN = Path(__file__).parent / "data" / "golden_multibrot_16.pgm"


def _grid(values, max_depth=10, kind="escape"):
    return DepthGrid(np.asarray(values, dtype=np.int64), max_depth, kind)


class TestRegion:
    def test_axes_are_pixel_centres(self):
        xs, ys = Region(0, 2, 1).axes(4, 2)
        assert xs.tolist() == [-1.5, -0.5, 0.5, 1.5]
        assert ys.tolist() == [0.5, -0.5]

    def test_aspect_checked(self):
        with pytest.raises(InvalidArgumentError):
            render_multibrot(Region(0, 2, 2), RenderSpec(20, 10, 5), 2, 1)

    def test_pixel_index_round_trip(self):
        region = Region(0.3 - 0.2j, 1.5, 0.75)
        xs, ys = region.axes(12, 6)
        col, row, inside = region.pixel_index(np.repeat(xs, 6), np.tile(ys, 12), 12, 6)
        assert inside.all()
        assert col.tolist() == np.repeat(np.arange(12), 6).tolist()
        assert row.tolist() == np.tile(np.arange(6), 12).tolist()

    def test_invalid_extent(self):
        with pytest.raises(InvalidArgumentError):
            Region(0, 0, 1)


class TestSpec:
    def test_pixel_budget(self):
        with pytest.raises(BudgetError):
            RenderSpec(100, 100, pixel_budget=5000)

    @pytest.mark.parametrize("kw", [{"width": 0}, {"max_depth": 0}, {"threads": 0}, {"height": 2.5}])
    def test_positive_integers(self, kw):
        args = {"width": 4, "height": 4}
        args.update(kw)
        with pytest.raises(InvalidArgumentError):
            RenderSpec(**args)

    def test_row_bands(self):
        assert row_bands(10, 1) == [(0, 3), (3, 6), (6, 9), (9, 10)]
        assert row_bands(3, 8) == [(0, 1), (1, 2), (2, 3)]
        bands = row_bands(257, 3)
        assert bands[0] == (0, 22) and bands[-1][1] == 257


class TestMultibrot:
    @pytest.mark.parametrize("p,q", [(2, 1), (4, 2), (3, 2), (5, 3)])
    def test_origin_pixel_is_sentinel(self, p, q):
        grid = render_multibrot(Region(0, 1, 1), RenderSpec(3, 3, 40), p, q)
        assert grid.values[1, 1] == 40

    def test_interior_parameter(self):
        grid = render_multibrot(Region(-1.94, 1e-3, 1e-3), RenderSpec(1, 1, 50), 4, 2)
        assert grid.values[0, 0] == 50

    def test_golden_bytes(self, tmp_path):
        grid = render_multibrot(Region.for_raster(-0.5, 1.75, 16, 16), RenderSpec(16, 16, 100), 2, 1)
        write_pgm(grid, tmp_path / "m.pgm")
        assert (tmp_path / "m.pgm").read_bytes() == GOLDEN.read_bytes()

    @pytest.mark.parametrize("p,q", [(4, 2), (3, 2)])
    def test_threads_bit_identical(self, p, q):
        region = Region.for_raster(-0.5, 2.0, 48, 40)
        grids = [render_multibrot(region, RenderSpec(48, 40, 30, threads=t), p, q).values for t in (1, 2, 8)]
        assert np.array_equal(grids[0], grids[1]) and np.array_equal(grids[0], grids[2])

    @pytest.mark.parametrize("p,q", [(4, 2), (3, 2), (2, 1), (7, 3)])
    def test_mirror_symmetry(self, p, q):
        grid = render_multibrot(Region.for_raster(-0.3, 1.8, 40, 36), RenderSpec(40, 36, 30), p, q)
        assert np.array_equal(grid.values, grid.values[::-1])

    def test_depth_prefix_stable(self):
        region = Region.for_raster(-0.5, 2.0, 40, 40)
        lo = render_multibrot(region, RenderSpec(40, 40, 15), 4, 2).values
        hi = render_multibrot(region, RenderSpec(40, 40, 40), 4, 2).values
        escaped = lo < 15
        assert np.array_equal(lo[escaped], hi[escaped])
        assert (hi[~escaped] >= 15).all()

    def test_values_in_range(self):
        grid = render_multibrot(Region.for_raster(-0.5, 2.0, 30, 30), RenderSpec(30, 30, 25), 4, 2)
        assert grid.values.min() >= 0 and grid.values.max() <= 25
        assert grid.capacity_mask is not None and not grid.capacity_mask.any()

    def test_capacity_flags_reach_the_mask(self, tmp_path):
        spec = RenderSpec(9, 9, 25, OrbitConfig(frontier_cap=20, probe_width=0))
        grid = render_multibrot(Region.for_raster(-1.9, 0.1, 9, 9), spec, 4, 2)
        assert grid.capacity_mask.any()
        assert (grid.values[grid.capacity_mask] == 25).all()
        written = write_outputs(grid, tmp_path / "m.pgm")
        assert "mask" in written
        meta = json.loads(Path(written["json"]).read_text())
        assert meta["capacity_flagged"] == int(grid.capacity_mask.sum())


class TestJuliaEscape:
    def test_unit_disk(self):
        n, hw = 101, 1.3
        region = Region.for_raster(0, hw, n, n)
        grid = render_julia_escape(0, region, RenderSpec(n, n, 60), 2, 1)
        xs, ys = region.axes(n, n)
        r = np.abs(xs[None, :] + 1j * ys[:, None])
        diag = math.hypot(*region.pixel_size(n, n))
        bounded = grid.bounded()
        assert (r[bounded] <= 1 + diag).all()
        assert bounded[r < 1 - diag].all()

    @pytest.mark.parametrize("z", [0, -2, 2])
    def test_minus_two_contains_orbit(self, z):
        grid = render_julia_escape(-2, Region(z, 1e-3, 1e-3), RenderSpec(1, 1, 40), 4, 2)
        assert grid.values[0, 0] == 40

    def test_outside_radius_is_zero(self):
        grid = render_julia_escape(-2, Region(3.0, 1e-3, 1e-3), RenderSpec(1, 1, 40), 4, 2)
        assert grid.values[0, 0] == 0

    def test_threads_bit_identical(self):
        region = Region.for_raster(0, 2.2, 40, 40)
        a = render_julia_escape(-1.94, region, RenderSpec(40, 40, 25, threads=1), 4, 2).values
        b = render_julia_escape(-1.94, region, RenderSpec(40, 40, 25, threads=8), 4, 2).values
        assert np.array_equal(a, b)


class TestInverse:
    def test_origin_is_fixed_under_preimages(self):
        pr = CorrespondenceParams(2, 1, 0)
        for _, pts in inverse_tree_levels(pr, 5):
            assert pts.tolist() == [0]

    def test_unit_circle_closed_form(self):
        pr = CorrespondenceParams(2, 1, 0)
        for level, pts in inverse_tree_levels(pr, 12, start=0.5):
            assert pts.size == 2**level
            want = 0.5 ** (2.0**-level)
            assert np.abs(np.abs(pts) - want).max() < 1e-12
            if level >= 10:
                assert np.abs(np.abs(pts) - 1).max() < 1e-3

    def test_points_lie_in_filled_julia_set(self):
        pr = CorrespondenceParams(4, 2, -2)
        for level, pts in inverse_tree_levels(pr, 6):
            if level >= 3:
                d, flags = membership_depths(pts, pr, 30)
                assert (d == 30).all() and not flags.any()

    def test_dedup_merges_only_close_points(self):
        pr = CorrespondenceParams(4, 2, -2)
        raw = dict(inverse_tree_levels(pr, 4, OrbitConfig(dedup=False)))
        merged = dict(inverse_tree_levels(pr, 4))
        tol = OrbitConfig().tol(pr)
        for level in range(5):
            assert merged[level].size <= raw[level].size
            d = np.abs(raw[level][:, None] - merged[level][None, :]).min(axis=1)
            assert d.max() <= tol

    def test_budget_refused(self):
        with pytest.raises(BudgetError) as ei:
            list(inverse_tree_levels(CorrespondenceParams(4, 2, -2), 13))
        assert ei.value.required == 4**13

    def test_zero_iterations_single_hit(self):
        for mode in ("full-tree", "random"):
            grid = render_julia_inverse(-2, Region.for_raster(0, 2.5, 11, 11), RenderSpec(11, 11), 4, 2, 0, mode)
            assert grid.values.sum() == 1 and grid.values[5, 5] == 1

    def test_random_mode_seeded(self):
        region = Region.for_raster(0, 2.5, 32, 32)
        spec = RenderSpec(32, 32)
        a = render_julia_inverse(-2, region, spec, 4, 2, 200, "random", seed=7)
        b = render_julia_inverse(-2, region, replace(spec, threads=8), 4, 2, 200, "random", seed=7)
        c = render_julia_inverse(-2, region, spec, 4, 2, 200, "random", seed=8)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)
        assert a.values.sum() == 2000

    def test_chaos_points_stay_bounded(self):
        pr = CorrespondenceParams(4, 2, -2)
        pts = chaos_game(pr, 500, seed=1)
        assert np.abs(pts).max() <= 2 + 1e-9

    def test_unknown_mode(self):
        with pytest.raises(InvalidArgumentError):
            render_julia_inverse(-2, Region(0, 1, 1), RenderSpec(4, 4), 4, 2, 3, "sideways")


class TestPGM:
    def test_all_sentinel_is_white(self):
        gray, _ = gray_levels(_grid(np.full((3, 4), 10)))
        assert (gray == 255).all()

    def test_all_zero_is_black(self):
        gray, _ = gray_levels(_grid(np.zeros((3, 4))))
        assert (gray == 0).all()

    def test_log_mapping(self):
        gray, _ = gray_levels(_grid([[1, 3]], max_depth=100))
        want = [math.floor(255 * math.log(1 + v) / math.log(101) + 0.5) for v in (1, 3)]
        assert gray.tolist() == [want]

    def test_hit_cap(self):
        v = np.zeros((10, 10))
        v.flat[:100] = np.arange(100)
        gray, desc = gray_levels(_grid(v, kind="hits"))
        cap = np.percentile(np.arange(1, 100), 99)
        assert f"hit_cap={float(cap)!r}" in desc
        assert gray.flat[99] == 255
        assert gray.flat[50] == math.floor(255 * 50 / cap + 0.5)

    def test_header_has_one_comment(self):
        data = pgm_bytes(np.zeros((2, 3), np.uint8), "kind=escape")
        lines = data.split(b"\n")
        assert lines[0] == b"P5"
        assert lines[1].startswith(b"# corrdyn ")
        assert lines[2] == b"3 2" and lines[3] == b"255"
        assert sum(1 for ln in lines[:4] if ln.startswith(b"#")) == 1
        assert len(data) == len(b"\n".join(lines[:4])) + 1 + 6

    def test_outputs(self, tmp_path):
        grid = render_multibrot(Region.for_raster(-0.5, 1.75, 8, 8), RenderSpec(8, 8, 20), 2, 1)
        written = write_outputs(grid, tmp_path / "m.pgm", tmp_path / "m.csv")
        assert "mask" not in written
        rows = (tmp_path / "m.csv").read_text().splitlines()
        assert len(rows) == 8 and all(len(r.split(",")) == 8 for r in rows)
        assert [int(x) for x in rows[0].split(",")] == grid.values[0].tolist()
        meta = json.loads((tmp_path / "m.json").read_text())
        assert meta["width"] == 8 and meta["max_depth"] == 20 and meta["image"] == "m.pgm"

    def test_io_error_names_path(self, tmp_path):
        with pytest.raises(OSError, match="nowhere"):
            write_pgm(_grid([[1]]), tmp_path / "nowhere" / "x.pgm")


class TestThreadsDefault:
    def test_env(self, monkeypatch):
        monkeypatch.setenv("CORRDYN_THREADS", "3")
        assert default_threads() == 3

    def test_bad_env(self, monkeypatch):
        monkeypatch.setenv("CORRDYN_THREADS", "many")
        with pytest.raises(InvalidArgumentError):
            default_threads()

    def test_fallback(self, monkeypatch):
        monkeypatch.delenv("CORRDYN_THREADS", raising=False)
        assert default_threads() >= 1
