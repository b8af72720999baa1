import random
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrdyn.core import CorrespondenceParams, escape_radius, forward_images, relation_residual
from corrdyn.errors import CapacityError, InvalidArgumentError, InvalidCycleError
from corrdyn.orbits import (
    BoundedBranch,
    OrbitConfig,
    classify,
    cycle_multiplier,
    detect_preperiodicity,
    enumerate_bounded_branches,
    membership_depth,
    membership_depths,
)
from corrdyn.region import Region

from oracles import brute_preperiodicity, quadratic_escape_depth

P42 = CorrespondenceParams(4, 2, -2)
CFG = OrbitConfig()


class TestEnumerate:
    def test_minus_two_single_branch(self):
        br = enumerate_bounded_branches(0, P42, 20)
        assert len(br) == 1
        assert br[0].points[:4] == (0, -2, 2, 2)
        assert all(z == 2 for z in br[0].points[2:])
        assert len(br[0]) == 21

    def test_i_four_branches(self):
        br = enumerate_bounded_branches(0, CorrespondenceParams(4, 2, 1j), 20)
        assert len(br) == 4
        for b in br:
            assert b.closure is not None
            assert detect_preperiodicity(b) is not None

    def test_far_parameter_empty(self):
        assert enumerate_bounded_branches(0, CorrespondenceParams(4, 2, 10), 5) == []

    def test_escaped_start(self):
        assert enumerate_bounded_branches(5, P42, 3) == []

    def test_depth_validated(self):
        with pytest.raises(InvalidArgumentError):
            enumerate_bounded_branches(0, P42, 0)

    def test_consecutive_points_satisfy_relation(self):
        pr = CorrespondenceParams(3, 2, -0.4 + 0.3j)
        R = escape_radius(pr)
        for b in enumerate_bounded_branches(0.2, pr, 8):
            for z, w in zip(b.points, b.points[1:]):
                assert relation_residual(z, w, pr) <= 1e-8
                assert abs(w) <= R

    def test_capacity_reported(self):
        with pytest.raises(CapacityError) as ei:
            enumerate_bounded_branches(0.1, CorrespondenceParams(3, 2, 0), 12, replace(CFG, frontier_cap=5))
        assert ei.value.level >= 1

    def test_classical_mode_is_one_orbit(self):
        pr = CorrespondenceParams(2, 1, -0.5)
        br = enumerate_bounded_branches(0, pr, 15)
        assert len(br) == 1
        z, pts = 0j, [0j]
        for _ in range(15):
            z = z * z - 0.5
            pts.append(z)
        # closure may pad with the cycle; agreement up to the closure point
        j, n = br[0].closure if br[0].closure else (15, 1)
        assert list(br[0].points[: j + n + 1]) == pts[: j + n + 1]


class TestPruning:
    def test_pruned_nodes_keep_escaping(self):
        rng = random.Random(5)
        for p, q, c in [(4, 2, -2), (3, 2, 0.5j), (7, 3, -1)]:
            pr = CorrespondenceParams(p, q, c)
            R = escape_radius(pr)
            pruned = []
            while len(pruned) < 100:
                z = complex(rng.uniform(-R, R), rng.uniform(-R, R))
                if abs(z) > R:
                    continue
                pruned.extend(w for w in forward_images(z, pr) if abs(w) > R)
            for z in pruned[:100]:
                frontier = [z]
                for _ in range(3):
                    nxt = []
                    for u in frontier:
                        for w in forward_images(u, pr):
                            assert abs(w) >= 2 * abs(u) * (1 - 1e-12)
                            nxt.append(w)
                    frontier = nxt


class TestPreperiodicity:
    def test_fixture_full_path(self):
        pp = detect_preperiodicity(BoundedBranch((0, -2, 2, 2, 2)))
        assert (pp.ell, pp.n) == (2, 1)

    def test_fixed_point(self):
        pp = detect_preperiodicity([1.5, 1.5, 1.5])
        assert (pp.ell, pp.n) == (0, 1)

    def test_no_repeat(self):
        assert detect_preperiodicity([0, 1, 2, 3, 4]) is None

    def test_short_branch_rejected(self):
        with pytest.raises(InvalidArgumentError):
            detect_preperiodicity([1])

    @given(
        st.integers(0, 8),
        st.integers(1, 6),
        st.integers(2, 30),
        st.lists(st.integers(0, 4), min_size=30, max_size=30),
    )
    @settings(max_examples=300, deadline=None)
    def test_matches_brute_force(self, ell, n, length, noise):
        # a pre-periodic sequence, then truncated and perturbed at random spots
        pts = [complex(10 + k, 0) for k in range(ell)]
        cyc = [complex(k, 1) for k in range(n)]
        while len(pts) < length:
            pts.append(cyc[(len(pts) - ell) % n])
        pts = pts[:length]
        for k, v in enumerate(noise[:length]):
            if v == 0 and k % 3 == 0:
                pts[k] += 1e-3
        got = detect_preperiodicity(pts, 1e-6)
        want = brute_preperiodicity(pts, 1e-6)
        assert (None if got is None else (got.ell, got.n)) == want


class TestCycles:
    def test_fixed_point_two(self):
        cyc = cycle_multiplier([2], P42)
        assert cyc.multiplier == 4
        assert cyc.classification == "repelling"

    def test_classical_fixed_point(self):
        cyc = cycle_multiplier([1], CorrespondenceParams(2, 1, 0))
        assert cyc.multiplier == 2
        assert cyc.classification == "repelling"

    def test_critical_cycle(self):
        cyc = cycle_multiplier([0, -1], CorrespondenceParams(2, 1, -1))
        assert cyc.multiplier == 0
        assert cyc.classification == "super-attracting"

    def test_attracting(self):
        # z*z + 0.2 has an attracting fixed point at (1 - sqrt(1 - 4c))/2
        c = 0.2
        z = (1 - (1 - 4 * c) ** 0.5) / 2
        cyc = cycle_multiplier([z], CorrespondenceParams(2, 1, c))
        assert cyc.classification == "attracting"
        assert abs(cyc.multiplier - 2 * z) < 1e-12

    def test_open_cycle_rejected(self):
        with pytest.raises(InvalidCycleError):
            cycle_multiplier([1.0], P42)
        with pytest.raises(InvalidCycleError):
            cycle_multiplier([], P42)

    def test_classify_boundaries(self):
        assert classify(0) == "super-attracting"
        assert classify(1 + 5e-10) == "indifferent"
        assert classify(1j) == "indifferent"
        assert classify(0.5) == "attracting"
        assert classify(1.01) == "repelling"

    def test_period_two_cycle(self):
        pr = CorrespondenceParams(2, 1, -2)
        # period-2 cycle of z*z - 2: roots of z^2 + z - 1
        a = (-1 + 5**0.5) / 2
        b = (-1 - 5**0.5) / 2
        cyc = cycle_multiplier([a, b], pr)
        assert abs(abs(cyc.multiplier) - abs(4 * a * b)) < 1e-9


class TestMembership:
    def test_minus_two_sentinel(self):
        assert membership_depth(0, P42, 50) == 50

    def test_escaping_start(self):
        d = membership_depth(3, CorrespondenceParams(2, 1, 0), 50)
        assert d == 0  # |3| already exceeds R = 2
        assert membership_depth(1.5, CorrespondenceParams(2, 1, 0), 50) == 1

    def test_interior_parameter(self):
        assert membership_depth(0, CorrespondenceParams(4, 2, -1.94), 50) == 50

    def test_outside_radius(self):
        assert membership_depth(10, P42, 5) == 0

    def test_max_depth_validated(self):
        for bad in (0, -1, 2.5):
            with pytest.raises(InvalidArgumentError):
                membership_depth(0, P42, bad)

    def test_capacity_raises_without_probe(self):
        cfg = OrbitConfig(frontier_cap=50, probe_width=0)
        with pytest.raises(CapacityError):
            membership_depth(0, CorrespondenceParams(4, 2, -1.94), 30, cfg)

    def test_probe_does_not_change_result(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-2.5, 2.5, 300) + 1j * rng.uniform(-2.5, 2.5, 300)
        pr = CorrespondenceParams(3, 2, -0.3 + 0.2j)
        plain = OrbitConfig(probe_width=0)
        for z in pts:
            assert membership_depth(z, pr, 12) == membership_depth(z, pr, 12, plain)

    def test_classical_oracle_equivalence(self):
        rng = random.Random(2024)
        for _ in range(10_000):
            c = complex(rng.uniform(-2, 0.6), rng.uniform(-1.2, 1.2))
            z = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            got = membership_depth(z, CorrespondenceParams(2, 1, c), 40)
            assert got == quadratic_escape_depth(z, c, 40)

    def test_batch_matches_scalar_julia(self):
        pr = CorrespondenceParams(4, 2, -1.94)
        xs, ys = Region(0, 2.2, 2.2).axes(24, 24)
        starts = (xs[None, :] + 1j * ys[:, None]).ravel()
        depths, flags = membership_depths(starts, pr, 25)
        assert not flags.any()
        assert list(depths) == [membership_depth(z, pr, 25) for z in starts]

    def test_batch_matches_scalar_parameters(self):
        xs, ys = Region(-0.5, 2.0, 2.0).axes(20, 20)
        cs = (xs[None, :] + 1j * ys[:, None]).ravel()
        base = CorrespondenceParams(3, 2, 0)
        depths, _ = membership_depths(np.zeros(cs.size), base, 30, cs=cs)
        assert list(depths) == [membership_depth(0, CorrespondenceParams(3, 2, c), 30) for c in cs]

    def test_batch_flags_instead_of_raising(self):
        cfg = OrbitConfig(frontier_cap=50, probe_width=0)
        pr = CorrespondenceParams(4, 2, -1.94)
        depths, flags = membership_depths([0, 5], pr, 30, cfg)
        assert flags.tolist() == [True, False]
        assert depths.tolist() == [30, 0]


class TestDedup:
    def test_merged_points_are_close(self):
        # q-th roots of symmetric points coincide; every merged pair is within tol
        pr = CorrespondenceParams(4, 2, 0.1)
        cfg = OrbitConfig(dedup_tol=1e-3)
        tol = cfg.tol(pr)
        cell = tol / 2
        rng = np.random.default_rng(9)
        pts = rng.normal(size=2000) + 1j * rng.normal(size=2000)
        seen = {}
        for w in pts:
            key = (round(w.real / cell), round(w.imag / cell))
            if key in seen:
                assert abs(seen[key] - w) <= tol
            seen.setdefault(key, w)

    def test_disabling_dedup_rarely_changes_multibrot(self):
        xs, ys = Region(-0.5, 2.0, 2.0).axes(64, 64)
        cs = (xs[None, :] + 1j * ys[:, None]).ravel()
        base = CorrespondenceParams(4, 2, 0)
        on, _ = membership_depths(np.zeros(cs.size), base, 14, OrbitConfig(probe_width=0), cs=cs)
        off, flags = membership_depths(
            np.zeros(cs.size), base, 14, OrbitConfig(probe_width=0, dedup=False, frontier_cap=1 << 15), cs=cs
        )
        assert not flags.any()
        assert np.count_nonzero(on != off) < 0.001 * cs.size
