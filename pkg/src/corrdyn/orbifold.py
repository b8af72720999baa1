"""Singular weights on the postcritical set and the expansion survey.

For a Misiurewicz parameter the bounded postcritical points ``a_j`` carry
indices ``nu_j`` (``q`` at the critical point, ``p`` elsewhere).  The weight

    rho(z) = prod_j |z - a_j| ** (1/nu_j - 1)

has the local singularity ``|z - a_j| ** -(1 - 1/nu_j)`` at each point.  The
survey measures how much inverse branches of the correspondence stretch
lengths measured with ``rho``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    CorrespondenceParams,
    as_complex,
    backward_arrays,
    branch_derivative,
)
from .errors import InvalidArgumentError, SingularPointError
from .orbits import DEFAULT_CONFIG, OrbitConfig, membership_depths

EPS_SING = 1e-12
HIST_BUCKETS = 32
HIST_MAX = 2.0


@dataclass(frozen=True)
class RamificationData:
    points: tuple
    nu: tuple

    def __post_init__(self):
        pts = tuple(as_complex(z, "ramified point") for z in self.points)
        nu = tuple(int(v) for v in self.nu)
        if len(pts) != len(nu):
            raise InvalidArgumentError("points and nu must have equal length")
        if any(v < 1 for v in nu):
            raise InvalidArgumentError("ramification indices must be >= 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "nu", nu)

    def index(self, z, tol: float = 1e-9) -> int:
        """Ramification index at ``z``; 1 away from the listed points."""
        for a, v in zip(self.points, self.nu):
            if abs(z - a) <= tol:
                return v
        return 1

    def to_json(self):
        return {"points": [[a.real, a.imag] for a in self.points], "nu": list(self.nu)}


EUCLIDEAN = RamificationData((), ())


def ramification_data(report, params: Optional[CorrespondenceParams] = None, cfg: OrbitConfig = DEFAULT_CONFIG):
    """Critical point plus the distinct points ``z_0 .. z_{ell+n-1}`` of a
    verified critical orbit, with indices ``q`` at 0 and ``p`` elsewhere."""
    if not report.verdict:
        raise InvalidArgumentError("ramification data needs a verified Misiurewicz report")
    p, q = report.p, report.q
    if params is not None and (params.p, params.q) != (p, q):
        raise InvalidArgumentError("params do not match the report")
    tol = cfg.tol(CorrespondenceParams(p, q, report.c))
    raw = report.orbit.points[1 : report.ell + report.n + 1]
    pts = [0j]
    for z in raw:
        if all(abs(z - a) > tol for a in pts):
            pts.append(complex(z))
    nu = [q] + [p] * (len(pts) - 1)
    return RamificationData(tuple(pts), tuple(nu))


def _distances(z: np.ndarray, data: RamificationData) -> np.ndarray:
    if not data.points:
        return np.full(z.shape, np.inf)
    return np.min(np.abs(z[..., None] - np.asarray(data.points)), axis=-1)


def weights(z, data: RamificationData) -> np.ndarray:
    """Vectorised :func:`weight` (no singularity check)."""
    z = np.asarray(z, dtype=complex)
    out = np.ones(z.shape)
    for a, v in zip(data.points, data.nu):
        if v != 1:
            out *= np.abs(z - a) ** (1.0 / v - 1.0)
    return out


def weight(z, data: RamificationData, eps_sing: float = EPS_SING) -> float:
    z = as_complex(z)
    for a in data.points:
        if abs(z - a) < eps_sing:
            raise SingularPointError(f"{z!r} is within {eps_sing:g} of ramified point {a!r}")
    rho = 1.0
    for a, v in zip(data.points, data.nu):
        rho *= abs(z - a) ** (1.0 / v - 1.0)
    return rho


def inverse_branch_norm(w, z_pre, params: CorrespondenceParams, data: RamificationData) -> float:
    """Length distortion, measured with the weight, of the inverse branch
    sending ``w`` to ``z_pre``: ``|1 / (dw/dz)| * rho(z_pre) / rho(w)``."""
    w = as_complex(w, "w")
    z_pre = as_complex(z_pre, "z_pre")
    deriv = branch_derivative(z_pre, w, params)
    return weight(z_pre, data) / (abs(deriv) * weight(w, data))


def inverse_branch_norms(w: np.ndarray, z_pre: np.ndarray, params: CorrespondenceParams, data):
    """Vectorised :func:`inverse_branch_norm`; callers keep points off the
    singular set."""
    p, q, c = params.p, params.q, params.c
    # |dz/dw| = q |w - c|^(q-1) / (p |z|^(p-1))
    g = q * np.abs(w - c) ** (q - 1) / (p * np.abs(z_pre) ** (p - 1))
    return g * weights(z_pre, data) / weights(w, data)


@dataclass(frozen=True)
class SampleSpec:
    """Sampling plan for :func:`expansion_survey`.

    ``grid`` points per side cover the orbit bounding box inflated by
    ``inflate`` (made square); ``near_grid`` points per side cover the
    square of half-side ``delta_near`` around each ramified point.
    """

    grid: int = 201
    near_grid: int = 201
    depth: int = 10
    delta_in: float = 1e-4
    delta_out: float = 1.0
    delta_near: float = 0.05
    inflate: float = 1.5

    def __post_init__(self):
        if self.grid < 2 or self.near_grid < 0:
            raise InvalidArgumentError("grid must be >= 2 and near_grid >= 0")
        if self.depth < 1:
            raise InvalidArgumentError("depth must be >= 1")
        if not 0 < self.delta_in < self.delta_near <= self.delta_out:
            raise InvalidArgumentError("need 0 < delta_in < delta_near <= delta_out")


@dataclass
class ExpansionSurvey:
    samples: int
    near_samples: int
    norms: int
    max_norm_near_singular: float
    global_max_norm: float
    histogram: list = field(default_factory=list)  # (bucket lower edge, count); last is overflow
    eta_estimate: float = math.nan
    euclidean: bool = False

    def to_json(self):
        return {
            "samples": self.samples,
            "near_samples": self.near_samples,
            "norms": self.norms,
            "max_norm_near_singular": self.max_norm_near_singular,
            "global_max_norm": self.global_max_norm,
            "eta_estimate": self.eta_estimate,
            "euclidean": self.euclidean,
            "histogram": [{"bucket": b, "count": n} for b, n in self.histogram],
        }


def _square_grid(center: complex, half: float, m: int) -> np.ndarray:
    t = np.linspace(-half, half, m)
    return (center.real + t[None, :] + 1j * (center.imag + t[:, None])).ravel()


def sample_points(params: CorrespondenceParams, data: RamificationData, spec: SampleSpec, cfg: OrbitConfig = DEFAULT_CONFIG):
    """Deterministic samples ``w`` near K_c: grid points at distance in
    ``[delta_in, delta_out]`` from the ramified points that keep a bounded
    orbit for ``spec.depth`` steps."""
    if not data.points:
        raise InvalidArgumentError("sampling needs at least one ramified point")
    pts = np.asarray(data.points)
    lo = complex(pts.real.min(), pts.imag.min())
    hi = complex(pts.real.max(), pts.imag.max())
    center = 0.5 * (lo + hi)
    half = spec.inflate * max(0.5 * (hi - lo).real, 0.5 * (hi - lo).imag, spec.delta_out)
    parts = [_square_grid(center, half, spec.grid)]
    if spec.near_grid:
        parts += [_square_grid(complex(a), spec.delta_near, spec.near_grid) for a in data.points]
    z = np.concatenate(parts)
    d = _distances(z, data)
    z = z[(d >= spec.delta_in) & (d <= spec.delta_out)]
    z = np.unique(z)  # sorted, so the sample set is independent of grid overlap
    depths, flags = membership_depths(z, params, spec.depth, cfg)
    return z[(depths == spec.depth) & ~flags]


def expansion_survey(
    c,
    params: CorrespondenceParams,
    data: RamificationData,
    sample_spec: SampleSpec = SampleSpec(),
    *,
    euclidean: bool = False,
    cfg: OrbitConfig = DEFAULT_CONFIG,
) -> ExpansionSurvey:
    """Inverse-branch norms at every sample and each of its ``p`` preimages.

    Samples are placed using ``data``; with ``euclidean=True`` the norms are
    measured without the weight (a negative control).
    ``eta_estimate`` is the largest norm among samples within ``delta_near``
    of the ramified points.
    """
    params = params.with_c(as_complex(c, "c"))
    w = sample_points(params, data, sample_spec, cfg)
    metric = EUCLIDEAN if euclidean else data
    zr, zi = backward_arrays(w.real, w.imag, params)  # p preimages per sample, node-major
    z_pre = zr + 1j * zi
    ww = np.repeat(w, params.p)
    ok = (_distances(z_pre, data) >= EPS_SING) & (z_pre != 0)
    norms = inverse_branch_norms(ww[ok], z_pre[ok], params, metric)
    near_w = _distances(ww[ok], data) <= sample_spec.delta_near
    if not np.all(np.isfinite(norms) & (norms > 0)):
        raise SingularPointError("non-finite inverse-branch norm in survey")

    edges = np.linspace(0.0, HIST_MAX, HIST_BUCKETS + 1)
    counts, _ = np.histogram(norms[norms < HIST_MAX], bins=edges)
    hist = [(float(e), int(n)) for e, n in zip(edges[:-1], counts)]
    hist.append((HIST_MAX, int((norms >= HIST_MAX).sum())))
    near_max = float(norms[near_w].max()) if near_w.any() else math.nan
    return ExpansionSurvey(
        samples=int(w.size),
        near_samples=int((_distances(w, data) <= sample_spec.delta_near).sum()),
        norms=int(norms.size),
        max_norm_near_singular=near_max,
        global_max_norm=float(norms.max()) if norms.size else math.nan,
        histogram=hist,
        eta_estimate=near_max,
        euclidean=euclidean,
    )
