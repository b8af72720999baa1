"""Branching forward-orbit trees: enumeration, membership depth, cycles.

Two enumeration flavours share the same escape pruning:

* :func:`enumerate_bounded_branches` keeps whole paths (orbits as sequences),
  closing a path into its cycle the first time it revisits one of its own
  points.  Used where orbits must be counted and inspected (Misiurewicz tests).
* :func:`membership_depth` / :func:`membership_depths` keep only the current
  frontier, merging coincident points per level.  Used for set membership and
  rendering.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    GERM_TOL,
    CorrespondenceParams,
    _scalar_roots,
    as_complex,
    branch_derivative,
    escape_radii,
    escape_radius,
    forward_arrays,
    forward_images,
    nearest_index,
    relation_residual,
)
from .errors import CapacityError, InvalidArgumentError, InvalidCycleError

CLASS_TOL = 1e-9


@dataclass(frozen=True)
class OrbitConfig:
    """Knobs of the orbit engine (each is also a CLI flag / config key)."""

    depth: int = 20
    escape_radius: Optional[float] = None
    dedup_tol: Optional[float] = None
    frontier_cap: int = 200_000
    periodicity_tol: float = 1e-6
    dedup: bool = True
    # membership first follows this many smallest-modulus orbits; if one of
    # them survives the start is in K_c without expanding the full frontier
    probe_width: int = 16

    def radius(self, params: CorrespondenceParams) -> float:
        return self.escape_radius if self.escape_radius is not None else escape_radius(params)

    def tol(self, params: CorrespondenceParams) -> float:
        if self.dedup_tol is not None:
            return self.dedup_tol
        return 1e-9 * max(1.0, self.radius(params))


DEFAULT_CONFIG = OrbitConfig()


@dataclass(frozen=True)
class BoundedBranch:
    """A bounded forward orbit ``points[0] -> points[1] -> ...``.

    ``closure`` is ``(j, n)`` when the enumeration closed the path because
    ``points[j + n]`` returned to ``points[j]``; later points then repeat
    the cycle ``points[j:j+n]``.
    """

    points: tuple
    closure: Optional[tuple] = None

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class Preperiodicity:
    ell: int
    n: int


@dataclass(frozen=True)
class Cycle:
    points: tuple
    multiplier: complex
    classification: str


@dataclass
class FrontierLevel:
    depth: int
    nodes: list = field(default_factory=list)  # (point, parent_index)


# ---------------------------------------------------------------------------
# path enumeration


def _history(levels, depth, idx):
    pts = []
    while depth >= 0:
        point, parent = levels[depth].nodes[idx]
        pts.append(point)
        idx = parent
        depth -= 1
    pts.reverse()
    return pts


def enumerate_bounded_branches(
    start,
    params: CorrespondenceParams,
    depth: int,
    cfg: OrbitConfig = DEFAULT_CONFIG,
) -> list:
    """All forward orbits of ``start`` that stay within the escape radius for
    ``depth`` steps, in breadth-first order.

    Nodes beyond the escape radius are pruned with their subtree.  Children of
    one parent closer than ``dedup_tol`` are merged (orbits agreeing at every
    index are the same orbit).  A path whose newest point comes within
    ``periodicity_tol`` of an earlier point of the same path is closed: it is
    continued along that cycle only, so orbits that differ only after entering
    their cycle are not counted twice.
    """
    if depth < 1:
        raise InvalidArgumentError("depth must be >= 1")
    start = as_complex(start, "start")
    R = cfg.radius(params)
    tol = cfg.tol(params)
    ptol = cfg.periodicity_tol
    if abs(start) > R:
        return []

    levels = [FrontierLevel(0, [(start, -1)])]
    open_idx = [0]
    closed = []  # (points, closure)
    for level in range(1, depth + 1):
        prev = levels[-1]
        cur = FrontierLevel(level)
        new_open = []
        for pi in open_idx:
            parent_point = prev.nodes[pi][0]
            kept = []
            for w in forward_images(parent_point, params):
                if abs(w) > R or any(abs(w - k) < tol for k in kept):
                    continue
                kept.append(w)
                cur.nodes.append((w, pi))
                ni = len(cur.nodes) - 1
                hist = _history(levels + [cur], level, ni)
                back = next(
                    (j for j in range(level - 1, -1, -1) if abs(hist[j] - w) < ptol), None
                )
                if back is None:
                    new_open.append(ni)
                else:
                    closed.append((hist, (back, level - back)))
        if len(new_open) > cfg.frontier_cap:
            raise CapacityError(level, len(new_open), cfg.frontier_cap)
        levels.append(cur)
        open_idx = new_open
        if not open_idx:
            break

    branches = []
    for hist, (j, n) in closed:
        pts = list(hist)
        while len(pts) < depth + 1:
            pts.append(pts[j + (len(pts) - j) % n])
        branches.append(BoundedBranch(tuple(pts), (j, n)))
    if len(levels) == depth + 1:
        for ni in open_idx:
            branches.append(BoundedBranch(tuple(_history(levels, depth, ni))))
    return branches


# ---------------------------------------------------------------------------
# pre-periodicity and cycles


def detect_preperiodicity(branch, tol: float = 1e-6) -> Optional[Preperiodicity]:
    """Minimal ``(ell, n)`` such that ``|z[j+n] - z[j]| < tol`` for every
    ``ell <= j <= len - n - 1``, smallest ``ell`` first, then smallest ``n``.

    The cycle must be witnessed at least twice (``ell + 2n <= len``); ``None``
    when no pair qualifies.  Indices are positions in ``branch``.
    """
    pts = np.asarray(branch.points if isinstance(branch, BoundedBranch) else branch, complex)
    L = pts.size
    if L < 2:
        raise InvalidArgumentError("branch must have at least 2 points")
    best = None
    for n in range(1, L // 2 + 1):
        ok = np.abs(pts[n:] - pts[:-n]) < tol  # ok[j] for j in 0..L-n-1
        bad = np.flatnonzero(~ok)
        ell = 0 if bad.size == 0 else int(bad[-1]) + 1
        if ell + 2 * n > L:
            continue
        if best is None or ell < best.ell:
            best = Preperiodicity(ell, n)
    return best


def classify(multiplier: complex, class_tol: float = CLASS_TOL) -> str:
    a = abs(multiplier)
    if a == 0.0:
        return "super-attracting"
    if abs(a - 1.0) <= class_tol:
        return "indifferent"
    return "repelling" if a > 1.0 else "attracting"


def _tracked_step(z: complex, target: complex, params: CorrespondenceParams) -> complex:
    imgs = forward_images(z, params)
    return imgs[nearest_index(target, imgs)]


def polish_cycle(points: Sequence[complex], params: CorrespondenceParams) -> tuple:
    """One Newton step on ``F(x) = x`` where ``F`` composes the branches that
    carry each cycle point to the next; kept only if it reduces the closing
    residual."""
    pts = [complex(z) for z in points]
    n = len(pts)
    if any(z == 0 for z in pts):
        return tuple(pts)

    def run(x0):
        xs = [x0]
        deriv = 1.0 + 0j
        for i in range(n):
            nxt = _tracked_step(xs[-1], pts[(i + 1) % n], params)
            deriv *= branch_derivative(xs[-1], nxt, params)
            xs.append(nxt)
        return xs, deriv

    xs, deriv = run(pts[0])
    err = abs(xs[-1] - xs[0])
    if err == 0.0 or deriv == 1.0:
        return tuple(pts)
    x1 = pts[0] - (xs[-1] - pts[0]) / (deriv - 1.0)
    try:
        ys, _ = run(x1)
    except Exception:
        return tuple(pts)
    if abs(ys[-1] - ys[0]) < err:
        return tuple(ys[:-1])
    return tuple(pts)


def cycle_multiplier(
    points: Sequence[complex],
    params: CorrespondenceParams,
    *,
    polish: bool = True,
    class_tol: float = CLASS_TOL,
    germ_tol: float = GERM_TOL,
) -> Cycle:
    """Multiplier of the cycle ``points[0] -> ... -> points[-1] -> points[0]``.

    It is the product of branch derivatives along the cycle; a cycle through
    the critical point 0 is super-attracting with multiplier 0.
    """
    pts = [as_complex(z, "cycle point") for z in points]
    if not pts:
        raise InvalidCycleError("empty cycle")
    n = len(pts)
    for i in range(n):
        if relation_residual(pts[i], pts[(i + 1) % n], params) > germ_tol:
            raise InvalidCycleError(
                f"cycle is not closed: {pts[i]} -> {pts[(i + 1) % n]} violates the relation"
            )
    if any(z == 0 for z in pts):
        return Cycle(tuple(pts), 0j, "super-attracting")
    if polish:
        pts = list(polish_cycle(pts, params))
    lam = 1.0 + 0j
    for i in range(n):
        lam *= branch_derivative(pts[i], pts[(i + 1) % n], params)
    return Cycle(tuple(pts), lam, classify(lam, class_tol))


# ---------------------------------------------------------------------------
# membership (frontier only)


def _check_depth(max_depth):
    if int(max_depth) != max_depth or max_depth < 1:
        raise InvalidArgumentError(f"max_depth must be an integer >= 1, got {max_depth}")
    return int(max_depth)


def _bounded_children(frontier, p, q, cr, ci, R):
    children = []
    for zr, zi in frontier:
        if zr == 0.0 and zi == 0.0:
            roots = [(0.0, 0.0)]
        else:
            roots = _scalar_roots(zr, zi, p, q)
        for rr, ri in roots:
            wr, wi = cr + rr, ci + ri
            if abs(complex(wr, wi)) <= R:
                children.append((wr, wi))
    return children


def membership_depth(
    start,
    params: CorrespondenceParams,
    max_depth: int,
    cfg: OrbitConfig = DEFAULT_CONFIG,
) -> int:
    """First level at which every orbit of ``start`` has escaped, or
    ``max_depth`` when some orbit survives (treated as a point of K_c)."""
    max_depth = _check_depth(max_depth)
    start = as_complex(start, "start")
    R = cfg.radius(params)
    if abs(start) > R:
        return 0
    p, q = params.p, params.q
    cr, ci = params.c.real, params.c.imag
    root = [(start.real, start.imag)]

    if q > 1 and cfg.probe_width > 0:
        beam = root
        for _ in range(1, max_depth):
            ch = _bounded_children(beam, p, q, cr, ci, R)
            if not ch:
                break
            beam = sorted(ch, key=lambda w: abs(complex(*w)))[: cfg.probe_width]
        else:
            return max_depth

    cell = 0.5 * cfg.tol(params)
    merge = cfg.dedup and q > 1
    cap = cfg.frontier_cap
    frontier = root
    for level in range(1, max_depth):
        children = _bounded_children(frontier, p, q, cr, ci, R)
        if merge and len(children) > 1:
            seen = {}
            for wr, wi in children:
                seen.setdefault((round(wr / cell), round(wi / cell)), (wr, wi))
            children = list(seen.values())
        if len(children) > cap:
            raise CapacityError(level, len(children), cap)
        if not children:
            return level
        frontier = children
    return max_depth


def _children_arrays(re, im, own, params, R, c_re, c_im):
    """Bounded forward images of frontier nodes, node-major, with owners."""
    q = params.q
    if c_re is None:
        cre, cim = forward_arrays(re, im, params)
    else:
        cre, cim = forward_arrays(re, im, params, c_re[own], c_im[own])
    cown = np.repeat(own, q)
    keep = np.hypot(cre, cim) <= R[cown]
    if q > 1:
        zero = np.repeat((re == 0.0) & (im == 0.0), q)
        keep &= ~(zero & (np.arange(cre.size) % q != 0))
    return cre[keep], cim[keep], cown[keep]


def _probe(re, im, alive, params, max_depth, R, c_re, c_im, width):
    """Starts for which one of the ``width`` smallest-modulus orbits (beam
    search) stays bounded through level ``max_depth - 1``."""
    own = np.flatnonzero(alive)
    re, im = re[alive], im[alive]
    for _ in range(1, max_depth):
        if own.size == 0:
            break
        re, im, own = _children_arrays(re, im, own, params, R, c_re, c_im)
        mod = np.hypot(re, im)
        order = np.lexsort((mod, own))  # stable: ties keep child order
        so = own[order]
        start = np.flatnonzero(np.r_[True, so[1:] != so[:-1]])
        rank = np.arange(so.size) - np.repeat(start, np.diff(np.r_[start, so.size]))
        sel = order[rank < width]
        # regroup by owner, modulus order within owner
        re, im, own = re[sel], im[sel], own[sel]
    proven = np.zeros(alive.size, dtype=bool)
    proven[own] = True
    return proven


def membership_depths(
    starts,
    params: CorrespondenceParams,
    max_depth: int,
    cfg: OrbitConfig = DEFAULT_CONFIG,
    cs=None,
):
    """Vectorised :func:`membership_depth` over many starting points.

    ``cs``, when given, holds one parameter per start (replacing
    ``params.c``), which is how parameter-plane renders batch their pixels.
    Returns ``(depths, capacity_flags)``; a flagged start exceeded the
    frontier cap and carries the sentinel ``max_depth``.  Each start is
    processed independently of the others in the batch.
    """
    max_depth = _check_depth(max_depth)
    starts = np.asarray(starts, dtype=complex).ravel()
    n = starts.size
    q = params.q
    if cs is None:
        c_re = c_im = None
        R = np.full(n, cfg.radius(params))
        tol = np.full(n, cfg.tol(params))
    else:
        cs = np.broadcast_to(np.asarray(cs, dtype=complex).ravel(), (n,))
        if not np.all(np.isfinite(cs)):
            raise InvalidArgumentError("parameters must be finite")
        c_re, c_im = cs.real.copy(), cs.imag.copy()
        if cfg.escape_radius is not None:
            R = np.full(n, float(cfg.escape_radius))
        else:
            R = escape_radii(params.p, q, np.abs(cs))
        tol = cfg.dedup_tol if cfg.dedup_tol is not None else 1e-9 * np.maximum(1.0, R)
        tol = np.broadcast_to(np.asarray(tol, dtype=np.float64), (n,))
    cell = 0.5 * tol
    merge = cfg.dedup and q > 1
    cap = cfg.frontier_cap

    depths = np.full(n, max_depth, dtype=np.int64)
    flags = np.zeros(n, dtype=bool)
    re, im = starts.real.copy(), starts.imag.copy()
    alive = np.hypot(re, im) <= R
    depths[~alive] = 0
    if q > 1 and cfg.probe_width > 0:
        alive &= ~_probe(re, im, alive, params, max_depth, R, c_re, c_im, cfg.probe_width)
    nown = np.flatnonzero(alive)  # owner (start index) of each frontier node
    re, im = re[alive], im[alive]
    for level in range(1, max_depth):
        if nown.size == 0:
            break
        cre, cim, cown = _children_arrays(re, im, nown, params, R, c_re, c_im)
        if merge and cown.size > 1:
            kx = np.rint(cre / cell[cown])
            ky = np.rint(cim / cell[cown])
            order = np.lexsort((ky, kx, cown))
            so, sx, sy = cown[order], kx[order], ky[order]
            first = np.ones(order.size, dtype=bool)
            first[1:] = (so[1:] != so[:-1]) | (sx[1:] != sx[:-1]) | (sy[1:] != sy[:-1])
            sel = np.sort(order[first])
            cre, cim, cown = cre[sel], cim[sel], cown[sel]
        counts = np.bincount(cown, minlength=n)
        over = counts > cap
        if over.any():
            flags |= over
            drop = over[cown]
            cre, cim, cown = cre[~drop], cim[~drop], cown[~drop]
        died = np.setdiff1d(nown, cown)
        depths[died[~flags[died]]] = level
        nown, re, im = cown, cre, cim
    return depths, flags
