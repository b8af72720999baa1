"""Misiurewicz parameters: verification, grid scans and Newton refinement.

A parameter ``c`` qualifies when the critical point 0 has exactly one bounded
forward orbit ``0 -> z_0 = c -> z_1 -> ...`` and that orbit is strictly
pre-periodic onto a repelling cycle.  Pre-periods reported here use that
``z``-indexing (``z_0 = c``); raw branch positions are one larger because the
branch also lists the critical point.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import CorrespondenceParams, as_complex, branch_derivative, forward_images
from .errors import (
    InvalidArgumentError,
    InvalidCycleError,
    NoConvergence,
    RefinementLost,
    SingularPointError,
)
from .orbits import (
    DEFAULT_CONFIG,
    BoundedBranch,
    Cycle,
    OrbitConfig,
    cycle_multiplier,
    detect_preperiodicity,
    enumerate_bounded_branches,
    polish_cycle,
)
from .region import Region

NO_BOUNDED_ORBIT = "no-bounded-orbit"
MULTIPLE_BOUNDED_ORBITS = "multiple-bounded-orbits"
NOT_PREPERIODIC = "not-preperiodic-within-depth"
PERIODIC_FROM_START = "periodic-from-start"
NON_REPELLING_CYCLE = "non-repelling-cycle"

REFINE_FD_STEP = 1e-7
REFINE_TOL = 1e-12
REFINE_MAX_ITER = 50
# after REFINE_MAX_ITER steps a residual above this is a failure
REFINE_ACCEPT = 1e-8
TRACK_MARGIN = 3.0


def _pair(z: complex):
    return [z.real, z.imag]


@dataclass
class MisiurewiczReport:
    c: complex
    verdict: bool
    bounded_branch_count: int
    orbit: Optional[BoundedBranch]
    ell: Optional[int]
    n: Optional[int]
    cycle: Optional[Cycle]
    reason: Optional[str]
    p: int
    q: int
    depth: int

    @property
    def multiplier(self) -> Optional[complex]:
        return None if self.cycle is None else self.cycle.multiplier

    def to_json(self) -> dict:
        cyc = None
        if self.cycle is not None:
            cyc = {
                "points": [_pair(z) for z in self.cycle.points],
                "multiplier": _pair(self.cycle.multiplier),
                "classification": self.cycle.classification,
            }
        return {
            "c": _pair(self.c),
            "p": self.p,
            "q": self.q,
            "depth": self.depth,
            "verdict": self.verdict,
            "bounded_branch_count": self.bounded_branch_count,
            "orbit": None if self.orbit is None else [_pair(z) for z in self.orbit.points],
            "ell": self.ell,
            "n": self.n,
            "multiplier": None if self.cycle is None else _pair(self.cycle.multiplier),
            "cycle": cyc,
            "reason": self.reason,
        }


def verify(c, p: int, q: int, cfg: OrbitConfig = DEFAULT_CONFIG) -> MisiurewiczReport:
    """Decide at depth ``cfg.depth`` whether ``c`` is a Misiurewicz parameter.

    Capacity errors from the orbit engine propagate; no verdict is produced
    in that case.
    """
    c = as_complex(c, "c")
    params = CorrespondenceParams(p, q, c)
    branches = enumerate_bounded_branches(0j, params, cfg.depth, cfg)

    def report(verdict, reason, orbit=None, ell=None, n=None, cycle=None):
        return MisiurewiczReport(
            c, verdict, len(branches), orbit, ell, n, cycle, reason, params.p, params.q, cfg.depth
        )

    if not branches:
        return report(False, NO_BOUNDED_ORBIT)
    if len(branches) > 1:
        return report(False, MULTIPLE_BOUNDED_ORBITS)
    orbit = branches[0]
    pre = detect_preperiodicity(orbit, cfg.periodicity_tol)
    if pre is None:
        return report(False, NOT_PREPERIODIC, orbit)
    raw_ell, n = pre.ell, pre.n
    ell = max(raw_ell - 1, 0)
    try:
        cycle = cycle_multiplier(polish_cycle(orbit.points[raw_ell : raw_ell + n], params), params)
    except (InvalidCycleError, SingularPointError):
        # closes only within periodicity_tol; a tolerance artefact, not a cycle
        cycle = None
    if raw_ell < 2:
        return report(False, PERIODIC_FROM_START, orbit, ell, n, cycle)
    if cycle is None:
        return report(False, NOT_PREPERIODIC, orbit)
    if cycle.classification != "repelling":
        return report(False, NON_REPELLING_CYCLE, orbit, ell, n, cycle)
    return report(True, None, orbit, ell, n, cycle)


# ---------------------------------------------------------------------------
# scanning


@dataclass(frozen=True)
class ScanConfig:
    l_max: int = 12
    n_max: int = 12
    scan_tol: float = 1e-2
    # stop following the tree once this many bounded paths are alive
    branch_cap: int = 64

    def __post_init__(self):
        if self.l_max < 1 or self.n_max < 1:
            raise InvalidArgumentError("l_max and n_max must be >= 1")
        if not self.scan_tol > 0:
            raise InvalidArgumentError("scan_tol must be positive")
        if self.branch_cap < 1:
            raise InvalidArgumentError("branch_cap must be >= 1")


@dataclass(frozen=True)
class Candidate:
    c: complex
    ell: int
    n: int
    residual: float


def unique_prefixes(params: CorrespondenceParams, levels: int, cfg: OrbitConfig, branch_cap: int):
    """``out[k]`` is the orbit ``0, z_0, ..., z_{k-1}`` when exactly one path
    of the pruned orbit tree of 0 survives to level ``k``, else ``None``."""
    R = cfg.radius(params)
    tol = cfg.tol(params)
    out = [None] * (levels + 1)
    paths = [(0j,)]
    out[0] = paths[0]
    for k in range(1, levels + 1):
        new = []
        for path in paths:
            kept = []
            for w in forward_images(path[-1], params):
                if abs(w) > R or any(abs(w - u) < tol for u in kept):
                    continue
                kept.append(w)
                new.append(path + (w,))
        if not new or len(new) > branch_cap:
            break
        paths = new
        if len(paths) == 1:
            out[k] = paths[0]
    return out


def _approx_multiplier(path, a: int, n: int, params) -> float:
    """|multiplier| of the near-cycle ``path[a] -> ... -> path[a+n]``."""
    m = 1.0
    for k in range(a, a + n):
        z, w = path[k], path[k + 1]
        if z == 0 or w == params.c:
            return 0.0
        m *= abs(branch_derivative(z, w, params))
    return m


def _residual(params, cfg: OrbitConfig, scfg: ScanConfig):
    """Smallest ``|z_{ell+n} - z_ell|`` over ``1 <= ell <= l_max``,
    ``1 <= n <= n_max`` where the orbit up to ``z_{ell+n}`` is unambiguous.

    Pairs whose near-cycle is not repelling are skipped: there a small
    residual only reflects convergence to an attracting cycle.
    """
    top = scfg.l_max + scfg.n_max + 1
    prefixes = unique_prefixes(params, top, cfg, scfg.branch_cap)
    best = (math.inf, 0, 0)
    for b in range(3, top + 1):
        path = prefixes[b]
        if path is None:
            continue
        for n in range(1, min(scfg.n_max, b - 2) + 1):
            a = b - n
            ell = a - 1
            if ell > scfg.l_max:
                continue
            r = abs(path[b] - path[a])
            if r < best[0] and _approx_multiplier(path, a, n, params) > 1.0:
                best = (r, ell, n)
    return best


def _local_minima(res: np.ndarray) -> np.ndarray:
    """Grid cells no larger than any 8-neighbour; plateaus keep their first
    cell in row-major order."""
    H, W = res.shape
    pad = np.full((H + 2, W + 2), np.inf)
    pad[1:-1, 1:-1] = res
    is_min = np.isfinite(res)
    earlier_tie = np.zeros_like(is_min)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            nb = pad[1 + dy : 1 + dy + H, 1 + dx : 1 + dx + W]
            is_min &= res <= nb
            if dy < 0 or (dy == 0 and dx < 0):
                earlier_tie |= res == nb
    return is_min & ~earlier_tie


def scan(
    region: Region,
    grid: Sequence[int],
    p: int,
    q: int,
    cfg: OrbitConfig = DEFAULT_CONFIG,
    scan_cfg: ScanConfig = ScanConfig(),
    threads: int = 1,
) -> list:
    """Candidate Misiurewicz parameters on a ``width x height`` grid of pixel
    centres of ``region``, in row-major order (top row first).

    A candidate is a grid local minimum of the pre-periodicity residual that
    lies below ``scan_cfg.scan_tol``.  Candidates carry residuals only;
    :func:`refine` and :func:`verify` decide.
    """
    width, height = (int(v) for v in grid)
    if width < 2 or height < 2:
        raise InvalidArgumentError("scan grid must be at least 2x2")
    CorrespondenceParams(p, q)  # validate exponents up front
    xs, ys = region.axes(width, height)

    def row(j):
        out = []
        for x in xs:
            params = CorrespondenceParams(p, q, complex(float(x), float(ys[j])))
            out.append(_residual(params, cfg, scan_cfg))
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, range(height)))
    else:
        rows = [row(j) for j in range(height)]

    res = np.array([[r[0] for r in rr] for rr in rows])
    mask = _local_minima(res) & (res < scan_cfg.scan_tol)
    out = []
    for j, i in zip(*np.nonzero(mask)):
        r, ell, n = rows[j][i]
        out.append(Candidate(complex(float(xs[i]), float(ys[j])), ell, n, float(r)))
    return out


def candidates_csv(cands: Sequence[Candidate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["c_re", "c_im", "ell", "n", "residual"])
    for cand in cands:
        w.writerow([repr(cand.c.real), repr(cand.c.imag), cand.ell, cand.n, repr(cand.residual)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# refinement


def track_orbit(c: complex, reference: Sequence[complex], params: CorrespondenceParams) -> list:
    """Follow at parameter ``c`` the branches that produced ``reference``
    (an orbit ``0, z_0, z_1, ...``), choosing at each step the root nearest
    the reference point.

    Raises RefinementLost when the nearest root is not at least
    ``TRACK_MARGIN`` times closer than every other root.
    """
    pr = params.with_c(c)
    out = [0j]
    for k in range(1, len(reference)):
        roots = forward_images(out[-1], pr)
        if len(roots) == 1:
            out.append(roots[0])
            continue
        d = sorted((abs(r - reference[k]), i) for i, r in enumerate(roots))
        if d[0][0] * TRACK_MARGIN >= d[1][0]:
            raise RefinementLost(
                f"branch tracking ambiguous at step {k} (c = {c!r})"
            )
        out.append(roots[d[0][1]])
    return out


def refine(
    cand: Candidate,
    p: int,
    q: int,
    cfg: OrbitConfig = DEFAULT_CONFIG,
    scan_cfg: ScanConfig = ScanConfig(),
) -> complex:
    """Newton iteration on ``h(c) = z_{ell+n}(c) - z_ell(c)`` along the frozen
    branches of the candidate's orbit.

    The derivative is a central difference with step ``1e-7``.  Iteration
    stops once ``|h| < 1e-12``, once a step no longer moves ``c`` in floating
    point, or after 50 steps.  The result is re-verified to still have a
    single bounded critical orbit.
    """
    params = CorrespondenceParams(p, q, cand.c)
    a = cand.ell + 1
    b = a + cand.n
    prefixes = unique_prefixes(params, b, cfg, scan_cfg.branch_cap)
    ref = prefixes[b]
    if ref is None:
        raise RefinementLost(f"orbit of the candidate at {cand.c!r} is not unique up to step {b}")
    ref = list(ref)

    def h(c, reference):
        orb = track_orbit(c, reference, params)
        return orb[b] - orb[a], orb

    c = cand.c
    hv, _ = h(c, ref)
    for _ in range(REFINE_MAX_ITER):
        if abs(hv) < REFINE_TOL:
            break
        hp, _ = h(c + REFINE_FD_STEP, ref)
        hm, _ = h(c - REFINE_FD_STEP, ref)
        deriv = (hp - hm) / (2.0 * REFINE_FD_STEP)
        if deriv == 0 or not math.isfinite(abs(deriv)):
            raise NoConvergence(f"vanishing derivative at c = {c!r}")
        c_new = c - hv / deriv
        if not math.isfinite(abs(c_new)) or abs(c_new - cand.c) > 1.0:
            raise NoConvergence(f"Newton iteration diverged from {cand.c!r}")
        hv_new, orb = h(c_new, ref)
        step = abs(c_new - c)
        c, hv, ref = c_new, hv_new, orb
        if step <= 4.0 * math.ulp(max(1.0, abs(c))):
            break
    if not abs(hv) < REFINE_ACCEPT:
        raise NoConvergence(f"residual {abs(hv):.3g} after {REFINE_MAX_ITER} Newton steps")

    check = unique_prefixes(params.with_c(c), b, cfg, scan_cfg.branch_cap)
    if check[b] is None:
        raise RefinementLost(f"refined parameter {c!r} no longer has a unique orbit prefix")
    return c
