"""Local primitives of the correspondence ``(w - c)**q == z**p``.

Forward images of ``z`` are the ``q`` solutions ``w``; backward images of ``w``
are the ``p`` solutions ``z``.  Roots are returned in ascending root index
``k`` where the ``k``-th forward root has phase ``(p*arg(z) + 2*pi*k)/q`` with
``arg`` the principal argument in ``(-pi, pi]``.

The arithmetic is written once on (real, imag) pairs so the scalar API and the
vectorised array routines used by the renderers round identically.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import (
    BranchPointError,
    ContinuationError,
    InvalidArgumentError,
    SingularPointError,
)

GERM_TOL = 1e-8
PATH_CLEARANCE = 1e-6
MAX_STEPS = 10**6
TRACKING_RATIO = 1.0 / 3.0
# a single adaptive step may move z by at most this fraction of |z| * q/p
STEP_GUARD = 0.25


def as_complex(value, name="z") -> complex:
    """Coerce ``value`` to a finite Python complex or raise InvalidArgumentError."""
    try:
        z = complex(value)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{name} is not a complex number: {value!r}") from exc
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise InvalidArgumentError(f"{name} must be finite, got {z!r}")
    return z


@dataclass(frozen=True)
class CorrespondenceParams:
    """Exponents ``p``, ``q`` and parameter ``c`` of one correspondence.

    ``q == 1`` is the classical single-valued map ``z**p + c``.  ``p`` and ``q``
    are used literally; they are not reduced by their gcd.
    """

    p: int
    q: int
    c: complex = 0j

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise InvalidArgumentError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.q < 1:
            raise InvalidArgumentError(f"q must be >= 1, got {self.q}")
        if self.p < 2:
            raise InvalidArgumentError(f"p must be >= 2, got {self.p}")
        if self.p <= self.q:
            raise InvalidArgumentError(f"p must exceed q (got p={self.p}, q={self.q})")
        object.__setattr__(self, "c", as_complex(self.c, "c"))

    def with_c(self, c) -> "CorrespondenceParams":
        return CorrespondenceParams(self.p, self.q, c)

    @property
    def ratio(self) -> float:
        return self.p / self.q


# ---------------------------------------------------------------------------
# pair arithmetic (works for Python floats and numpy float arrays alike)


def _cmul(ar, ai, br, bi):
    return ar * br - ai * bi, ar * bi + ai * br


def _ipow(re, im, m: int):
    """``(re + i*im)**m`` by left-to-right binary exponentiation, m >= 1."""
    rr, ri = re, im
    for bit in bin(m)[3:]:
        rr, ri = _cmul(rr, ri, rr, ri)
        if bit == "1":
            rr, ri = _cmul(rr, ri, re, im)
    return rr, ri


@lru_cache(maxsize=None)
def unit_roots(n: int) -> tuple:
    """The ``n``-th roots of unity as (re, im) pairs, ascending index.

    Exact where the value is exactly representable, and conjugate-symmetric
    bit for bit (root ``n-k`` is the conjugate of root ``k``).
    """
    out = []
    for k in range(n):
        if k == 0:
            out.append((1.0, 0.0))
        elif 2 * k == n:
            out.append((-1.0, 0.0))
        elif 4 * k == n:
            out.append((0.0, 1.0))
        elif 4 * k == 3 * n:
            out.append((0.0, -1.0))
        elif 2 * k > n:
            r, i = out[n - k]
            out.append((r, -i))
        else:
            t = 2.0 * math.pi * k / n
            out.append((math.cos(t), math.sin(t)))
    return tuple(out)


def _times_root(re, im, root):
    rr, ri = root
    if ri == 0.0:
        return (re, im) if rr == 1.0 else (-re, -im)
    if rr == 0.0:
        return (-im, re) if ri == 1.0 else (im, -re)
    return _cmul(re, im, rr, ri)


def _scalar_roots(ur: float, ui: float, num: int, den: int) -> list:
    """All ``den``-th roots of ``u**num`` for ``u = ur + i*ui != 0``, as pairs.

    Root ``k`` has phase ``(num*arg(u) + 2*pi*k)/den``.
    """
    if num % den == 0:
        br, bi = _ipow(ur, ui, num // den)
        return [_times_root(br, bi, r) for r in unit_roots(den)]
    neg = ui < 0.0
    ui = -ui if neg else ui + 0.0  # + 0.0 maps -0.0 to +0.0 (arg = +pi on the negative axis)
    # numpy's ufuncs on Python floats round exactly like the array loops in
    # _array_roots; libm's exp/log/atan2 do not always agree with them
    mod = float(np.exp((num / den) * np.log(abs(complex(ur, ui)))))
    theta = float(np.arctan2(ui, ur))
    roots = []
    for k in range(den):
        ph = (num * theta + 2.0 * math.pi * k) / den
        roots.append((mod * float(np.cos(ph)), mod * float(np.sin(ph))))
    if neg:
        roots = [(roots[-k % den][0], -roots[-k % den][1]) for k in range(den)]
    return roots


def _array_roots(ur: np.ndarray, ui: np.ndarray, num: int, den: int) -> list:
    """Vectorised twin of :func:`_scalar_roots`; returns ``den`` (re, im) array pairs.

    The caller guarantees ``u != 0`` elementwise.
    """
    if num % den == 0:
        br, bi = _ipow(ur, ui, num // den)
        return [_times_root(br, bi, r) for r in unit_roots(den)]
    neg = ui < 0.0
    ui = np.where(neg, -ui, ui + 0.0)
    mod = np.exp((num / den) * np.log(np.hypot(ur, ui)))
    theta = np.arctan2(ui, ur)
    roots = []
    for k in range(den):
        ph = (num * theta + 2.0 * math.pi * k) / den
        roots.append((mod * np.cos(ph), mod * np.sin(ph)))
    out = []
    for k in range(den):
        rr, ri = roots[k]
        mr, mi = roots[-k % den]
        out.append((np.where(neg, mr, rr), np.where(neg, -mi, ri)))
    return out


# ---------------------------------------------------------------------------
# public scalar operations


def forward_images(z, params: CorrespondenceParams) -> list:
    """All ``w`` with ``(w - c)**q == z**p``; ``[c]`` when ``z == 0``.

    >>> forward_images(-2, CorrespondenceParams(4, 2, -2))
    [(2+0j), (-6+0j)]
    """
    z = as_complex(z)
    c = params.c
    if z == 0:
        return [c]
    return [
        complex(c.real + r, c.imag + i)
        for r, i in _scalar_roots(z.real, z.imag, params.p, params.q)
    ]


def backward_images(w, params: CorrespondenceParams) -> list:
    """All ``z`` with ``z**p == (w - c)**q``; ``[0]`` when ``w == c``."""
    w = as_complex(w, "w")
    ur, ui = w.real - params.c.real, w.imag - params.c.imag
    if ur == 0.0 and ui == 0.0:
        return [0j]
    return [complex(r, i) for r, i in _scalar_roots(ur, ui, params.q, params.p)]


def forward_arrays(re: np.ndarray, im: np.ndarray, params: CorrespondenceParams, c_re=None, c_im=None):
    """Forward images of many points at once.

    Returns ``(re, im)`` arrays of length ``q * len(re)`` in node-major order
    (children of node ``i`` occupy ``i*q .. i*q + q - 1``).  A node at 0 gets
    ``q`` copies of ``c``.  ``c_re``/``c_im`` give a per-node parameter in
    place of ``params.c``.
    """
    re = np.asarray(re, dtype=np.float64)
    im = np.asarray(im, dtype=np.float64)
    q = params.q
    zero = (re == 0.0) & (im == 0.0)
    safe_re = np.where(zero, 1.0, re)
    roots = _array_roots(safe_re, im, params.p, q)
    out_re = np.empty((re.size, q))
    out_im = np.empty((re.size, q))
    for k, (rr, ri) in enumerate(roots):
        out_re[:, k] = np.where(zero, 0.0, rr)
        out_im[:, k] = np.where(zero, 0.0, ri)
    if c_re is None:
        out_re += params.c.real
        out_im += params.c.imag
    else:
        out_re += np.asarray(c_re, dtype=np.float64)[:, None]
        out_im += np.asarray(c_im, dtype=np.float64)[:, None]
    return out_re.ravel(), out_im.ravel()


def backward_arrays(re: np.ndarray, im: np.ndarray, params: CorrespondenceParams):
    """Backward images of many points; ``p`` children per node, node-major.

    A node equal to ``c`` gets ``p`` copies of 0.
    """
    ur = np.asarray(re, dtype=np.float64) - params.c.real
    ui = np.asarray(im, dtype=np.float64) - params.c.imag
    p = params.p
    zero = (ur == 0.0) & (ui == 0.0)
    roots = _array_roots(np.where(zero, 1.0, ur), ui, params.q, p)
    out_re = np.empty((ur.size, p))
    out_im = np.empty((ur.size, p))
    for k, (rr, ri) in enumerate(roots):
        out_re[:, k] = np.where(zero, 0.0, rr)
        out_im[:, k] = np.where(zero, 0.0, ri)
    return out_re.ravel(), out_im.ravel()


def relation_residual(z: complex, w: complex, params: CorrespondenceParams) -> float:
    """Relative residual ``|(w-c)**q - z**p| / max(1, |z|**p)``."""
    return abs((w - params.c) ** params.q - z**params.p) / max(1.0, abs(z) ** params.p)


def check_pair(z, w, params: CorrespondenceParams, tol: float = GERM_TOL):
    z = as_complex(z)
    w = as_complex(w, "w")
    if relation_residual(z, w, params) > tol:
        raise InvalidArgumentError(
            f"({z}, {w}) does not satisfy (w-c)^{params.q} = z^{params.p} within {tol:g}"
        )
    return z, w


def branch_derivative(z, w, params: CorrespondenceParams) -> complex:
    """``dw/dz = p z^(p-1) / (q (w-c)^(q-1))`` along the branch through ``(z, w)``."""
    z, w = check_pair(z, w, params)
    if z == 0:
        raise SingularPointError("branch derivative undefined at the critical point z = 0")
    if w == params.c:
        raise SingularPointError("branch derivative undefined at the critical value w = c")
    p, q = params.p, params.q
    return p * z ** (p - 1) / (q * (w - params.c) ** (q - 1))


@lru_cache(maxsize=4096)
def _escape_radius(ratio: float, abs_c: float, tol: float) -> float:
    def gap(r):
        return r**ratio - abs_c - 2.0 * r

    lo, hi = 1.0, 2.0
    if gap(lo) >= 0.0:  # pragma: no cover - impossible since 1 - 2 < 0
        return lo
    while gap(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def escape_radius(params: CorrespondenceParams, tol: float = 1e-9) -> float:
    """Smallest ``R >= 1`` with ``r**(p/q) - |c| >= 2r`` for all ``r >= R``.

    The gap function is convex and negative at ``r = 1``, so its unique root
    is bracketed and bisected; the upper bracket is returned, which keeps the
    guarantee ``|w| >= 2|z|`` for every forward image of ``|z| >= R``.
    """
    return _escape_radius(params.p / params.q, abs(params.c), tol)


def escape_radii(p: int, q: int, abs_c: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Elementwise :func:`escape_radius` for many ``|c|``, running the same
    bracket-and-bisect steps on arrays."""
    ratio = p / q
    a = np.asarray(abs_c, dtype=np.float64)

    def gap(r):
        return r**ratio - a - 2.0 * r

    lo = np.ones_like(a)
    hi = np.full_like(a, 2.0)
    grow = gap(hi) < 0.0
    while grow.any():
        lo = np.where(grow, hi, lo)
        hi = np.where(grow, 2.0 * hi, hi)
        grow = gap(hi) < 0.0
    active = hi - lo > tol
    while active.any():
        mid = 0.5 * (lo + hi)
        up = gap(mid) >= 0.0
        hi = np.where(active & up, mid, hi)
        lo = np.where(active & ~up, mid, lo)
        active = hi - lo > tol
    return hi


# ---------------------------------------------------------------------------
# analytic continuation


@dataclass(frozen=True)
class BranchGerm:
    z0: complex
    w0: complex

    def validate(self, params: CorrespondenceParams, tol: float = GERM_TOL) -> "BranchGerm":
        check_pair(self.z0, self.w0, params, tol)
        return self


def _segment_distance_to_origin(a: complex, b: complex) -> float:
    d = b - a
    dd = (d * d.conjugate()).real
    if dd == 0.0:
        return abs(a)
    t = min(1.0, max(0.0, -((a * d.conjugate()).real) / dd))
    return abs(a + d * t)


def _validate_path(path: Sequence, clearance: float) -> list:
    verts = [as_complex(v, "path vertex") for v in path]
    if len(verts) < 2:
        raise InvalidArgumentError("a path needs at least 2 vertices")
    for a, b in zip(verts, verts[1:]):
        if _segment_distance_to_origin(a, b) < clearance:
            raise BranchPointError(
                f"segment {a} -> {b} passes within {clearance:g} of the branch point 0"
            )
    return verts


def continue_branch(
    germ: BranchGerm,
    path: Sequence,
    params: CorrespondenceParams,
    *,
    clearance: float = PATH_CLEARANCE,
    max_steps: int = MAX_STEPS,
    germ_tol: float = GERM_TOL,
) -> complex:
    """Analytically continue the branch through ``germ`` along a polyline.

    Each segment is walked with adaptive steps; at every sample the forward
    image nearest the previous value is taken, and the step is accepted only
    when that root is at least three times closer than any other root and the
    step is short relative to ``|z|``.  Returns the value at the last vertex.
    """
    germ.validate(params, germ_tol)
    verts = _validate_path(path, clearance)
    z0 = as_complex(germ.z0)
    if abs(verts[0] - z0) > 1e-12 * max(1.0, abs(z0)):
        raise InvalidArgumentError("path must start at the germ's base point")
    w = as_complex(germ.w0, "w0")
    if params.q == 1:
        return forward_images(verts[-1], params)[0]

    guard = STEP_GUARD * params.q / params.p
    steps = 0
    for a, b in zip(verts, verts[1:]):
        if a == b:
            continue
        t, h = 0.0, 1.0
        z_cur = a
        while t < 1.0:
            steps += 1
            if steps > max_steps:
                raise ContinuationError(f"continuation exceeded max_steps={max_steps}")
            t_new = min(1.0, t + h)
            z_new = b if t_new == 1.0 else a + (b - a) * t_new
            if abs(z_new - z_cur) > guard * min(abs(z_cur), abs(z_new)):
                h *= 0.5
                continue
            roots = forward_images(z_new, params)
            dist = [abs(r - w) for r in roots]
            j = min(range(len(roots)), key=dist.__getitem__)
            other = min(d for i, d in enumerate(dist) if i != j)
            if dist[j] < TRACKING_RATIO * other:
                w, z_cur, t = roots[j], z_new, t_new
                h *= 2.0
            else:
                h *= 0.5
    return w


def nearest_index(value: complex, candidates: Sequence[complex]) -> int:
    return min(range(len(candidates)), key=lambda i: abs(candidates[i] - value))


def monodromy_permutation(
    params: CorrespondenceParams,
    r: float = 1.0,
    basepoint_arg: float = 0.0,
    segments: int | None = None,
) -> tuple:
    """Permutation of the ``q`` branch indices after one counterclockwise loop
    around 0 on the circle of radius ``r``; ``perm[k]`` is the index reached
    from branch ``k``.  Expected: ``k -> (k + p) % q``.
    """
    if not (r > 0 and math.isfinite(r)):
        raise InvalidArgumentError(f"radius must be positive, got {r}")
    n = max(64 * params.q, 64) if segments is None else segments
    if n < 64 * params.q:
        raise InvalidArgumentError(f"need at least {64 * params.q} segments")
    base = cmath.rect(r, basepoint_arg)
    verts = [base] + [cmath.rect(r, basepoint_arg + 2 * math.pi * j / n) for j in range(1, n)]
    verts.append(base)
    germs = forward_images(base, params)
    perm = []
    for w0 in germs:
        w_end = continue_branch(BranchGerm(base, w0), verts, params)
        perm.append(nearest_index(w_end, germs))
    return tuple(perm)


def cycle_notation(perm: Sequence[int]) -> str:
    """Disjoint-cycle notation without fixed points; identity is ``()``.

    >>> cycle_notation((1, 0, 2))
    '(0 1)'
    """
    seen = set()
    parts = []
    for start in range(len(perm)):
        if start in seen:
            continue
        cyc = [start]
        seen.add(start)
        nxt = perm[start]
        while nxt != start:
            cyc.append(nxt)
            seen.add(nxt)
            nxt = perm[nxt]
        if len(cyc) > 1:
            parts.append("(" + " ".join(map(str, cyc)) + ")")
    return "".join(parts) or "()"
