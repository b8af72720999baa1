"""Rasters of parameter planes and Julia sets, plus PGM/CSV/JSON writers.

Escape renders store, per pixel, the membership depth (``max_depth`` marks
a bounded point).  Inverse renders store hit counts of backward-orbit
points.  Escape renders are cut into row bands evaluated on a thread pool;
every pixel is computed independently, so the output does not depend on the
band layout or the number of workers.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .core import CorrespondenceParams, as_complex, backward_arrays, backward_images
from .errors import BudgetError, InvalidArgumentError
from .orbits import DEFAULT_CONFIG, OrbitConfig, membership_depths
from .region import Region

PIXEL_BUDGET = 1 << 26
NODE_BUDGET = 1 << 24
BURN_IN = 100
POINTS_PER_ITER = 10
HIT_PERCENTILE = 99.0
# parents expanded per batch when building inverse-tree levels
TREE_CHUNK = 1 << 20


@dataclass(frozen=True)
class RenderSpec:
    width: int
    height: int
    max_depth: int = 100
    cfg: OrbitConfig = DEFAULT_CONFIG
    threads: int = 1
    pixel_budget: int = PIXEL_BUDGET
    node_budget: int = NODE_BUDGET

    def __post_init__(self):
        for name in ("width", "height", "max_depth", "threads"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer, got {v!r}")
        if self.width * self.height > self.pixel_budget:
            raise BudgetError(self.width * self.height, self.pixel_budget, "pixel")


@dataclass
class DepthGrid:
    values: np.ndarray  # (height, width) int64, row 0 at the top
    max_depth: int
    kind: str = "escape"  # or "hits"
    capacity_mask: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def bounded(self) -> np.ndarray:
        return self.values == self.max_depth


def row_bands(height: int, workers: int) -> list:
    band = max(1, math.ceil(height / (4 * workers)))
    return [(r, min(height, r + band)) for r in range(0, height, band)]


def _render_rows(fn, height: int, threads: int):
    bands = row_bands(height, threads)
    if threads <= 1:
        return [fn(a, b) for a, b in bands], bands
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(*ab), bands)), bands


def _escape_render(region: Region, spec: RenderSpec, params: CorrespondenceParams, per_pixel_c: bool):
    region.check_aspect(spec.width, spec.height)
    xs, ys = region.axes(spec.width, spec.height)
    values = np.empty((spec.height, spec.width), dtype=np.int64)
    mask = np.zeros((spec.height, spec.width), dtype=bool)

    def band(r0, r1):
        pts = (xs[None, :] + 1j * ys[r0:r1, None]).ravel()
        if per_pixel_c:
            d, f = membership_depths(np.zeros(pts.size), params, spec.max_depth, spec.cfg, cs=pts)
        else:
            d, f = membership_depths(pts, params, spec.max_depth, spec.cfg)
        values[r0:r1] = d.reshape(r1 - r0, spec.width)
        mask[r0:r1] = f.reshape(r1 - r0, spec.width)

    _render_rows(band, spec.height, spec.threads)
    return values, mask


def _meta(region: Region, spec: RenderSpec, params: CorrespondenceParams, **extra) -> dict:
    cfg = spec.cfg
    meta = {
        "region": region.to_json(),
        "width": spec.width,
        "height": spec.height,
        "max_depth": spec.max_depth,
        "p": params.p,
        "q": params.q,
        "orbit_config": {
            "depth": cfg.depth,
            "escape_radius": cfg.escape_radius,
            "dedup_tol": cfg.dedup_tol,
            "frontier_cap": cfg.frontier_cap,
            "periodicity_tol": cfg.periodicity_tol,
            "dedup": cfg.dedup,
            "probe_width": cfg.probe_width,
        },
    }
    meta.update(extra)
    return meta


def render_multibrot(region: Region, spec: RenderSpec, p: int, q: int) -> DepthGrid:
    """Parameter plane: pixel ``c`` gets the membership depth of 0 for ``c``."""
    params = CorrespondenceParams(p, q)
    values, mask = _escape_render(region, spec, params, per_pixel_c=True)
    meta = _meta(region, spec, params, render="multibrot", capacity_flagged=int(mask.sum()))
    return DepthGrid(values, spec.max_depth, "escape", mask, meta)


def render_julia_escape(c, region: Region, spec: RenderSpec, p: int, q: int) -> DepthGrid:
    """Dynamical plane: pixel ``z`` gets its membership depth for ``c``."""
    params = CorrespondenceParams(p, q, c)
    values, mask = _escape_render(region, spec, params, per_pixel_c=False)
    meta = _meta(
        region, spec, params, render="julia", c=[params.c.real, params.c.imag],
        capacity_flagged=int(mask.sum()),
    )
    return DepthGrid(values, spec.max_depth, "escape", mask, meta)


# ---------------------------------------------------------------------------
# inverse iteration


def _dedup_level(z: np.ndarray, tol: float) -> np.ndarray:
    """Keep the first point of each ``tol/2`` cell, preserving order."""
    if z.size < 2:
        return z
    cell = 0.5 * tol
    kx, ky = np.rint(z.real / cell), np.rint(z.imag / cell)
    order = np.lexsort((ky, kx))  # stable, so the first of each cell leads
    sx, sy = kx[order], ky[order]
    first = np.ones(order.size, dtype=bool)
    first[1:] = (sx[1:] != sx[:-1]) | (sy[1:] != sy[:-1])
    return z[np.sort(order[first])]


def inverse_tree_levels(
    params: CorrespondenceParams,
    n_iters: int,
    cfg: OrbitConfig = DEFAULT_CONFIG,
    start=0j,
    node_budget: int = NODE_BUDGET,
) -> Iterator:
    """Yield ``(level, points)`` for the backward-orbit tree of ``start``,
    levels ``0 .. n_iters``; coincident points are merged per level when
    ``cfg.dedup`` is set."""
    if n_iters < 0:
        raise InvalidArgumentError("n_iters must be >= 0")
    required = params.p**n_iters
    if required > node_budget:
        raise BudgetError(required, node_budget)
    tol = cfg.tol(params)
    level = np.array([as_complex(start, "start")])
    yield 0, level
    for k in range(1, n_iters + 1):
        parts = []
        for i in range(0, level.size, TREE_CHUNK):
            chunk = level[i : i + TREE_CHUNK]
            re, im = backward_arrays(chunk.real, chunk.imag, params)
            z = re + 1j * im
            # a parent at c has the single preimage 0, repeated p times
            at_c = np.repeat(chunk == params.c, params.p)
            dup = at_c & (np.arange(z.size) % params.p != 0)
            parts.append(z[~dup])
        level = np.concatenate(parts)
        if cfg.dedup:
            level = _dedup_level(level, tol)
        yield k, level


def _accumulate(hits: np.ndarray, z: np.ndarray, region: Region):
    h, w = hits.shape
    col, row, inside = region.pixel_index(z.real, z.imag, w, h)
    np.add.at(hits, (row[inside], col[inside]), 1)


def chaos_game(params: CorrespondenceParams, n_points: int, seed: int, start=0j, burn_in: int = BURN_IN):
    """Random backward orbit: each step picks one preimage uniformly."""
    rng = np.random.default_rng(seed)
    z = as_complex(start, "start")
    out = np.empty(n_points, dtype=complex)
    for i in range(burn_in + n_points):
        pre = backward_images(z, params)
        z = pre[int(rng.integers(len(pre)))]
        if i >= burn_in:
            out[i - burn_in] = z
    return out


def render_julia_inverse(
    c,
    region: Region,
    spec: RenderSpec,
    p: int,
    q: int,
    n_iters: int,
    mode: str = "full-tree",
    seed: int = 0,
    start=0j,
) -> DepthGrid:
    """Hit counts of backward orbits of ``start`` (default the critical
    point).

    ``full-tree`` counts every point of levels ``0 .. n_iters`` and refuses
    when ``p**n_iters`` exceeds the node budget.  ``random`` counts
    ``10 * n_iters`` chaos-game points after a burn-in.  ``n_iters = 0``
    gives a single hit at ``start`` in either mode.
    """
    params = CorrespondenceParams(p, q, c)
    region.check_aspect(spec.width, spec.height)
    if mode not in ("full-tree", "random"):
        raise InvalidArgumentError(f"unknown inverse mode {mode!r}")
    if int(n_iters) != n_iters or n_iters < 0:
        raise InvalidArgumentError("n_iters must be a non-negative integer")
    hits = np.zeros((spec.height, spec.width), dtype=np.int64)
    start = as_complex(start, "start")
    if n_iters == 0:
        _accumulate(hits, np.array([start]), region)
        total = 1
    elif mode == "full-tree":
        total = 0
        for _, pts in inverse_tree_levels(params, n_iters, spec.cfg, start, spec.node_budget):
            _accumulate(hits, pts, region)
            total += pts.size
    else:
        pts = chaos_game(params, POINTS_PER_ITER * n_iters, seed, start)
        _accumulate(hits, pts, region)
        total = pts.size
    meta = _meta(
        region, spec, params, render="inverse-julia", c=[params.c.real, params.c.imag],
        mode=mode, n_iters=int(n_iters), seed=int(seed), start=[start.real, start.imag],
        points=int(total),
    )
    return DepthGrid(hits, spec.max_depth, "hits", None, meta)


# ---------------------------------------------------------------------------
# output


def gray_levels(grid: DepthGrid):
    """8-bit gray values and the mapping description stored in the header."""
    v = grid.values.astype(np.float64)
    if grid.kind == "escape":
        g = np.floor(255.0 * np.log1p(v) / math.log1p(grid.max_depth) + 0.5)
        desc = f"kind=escape max_depth={grid.max_depth} gray=round(255*log(1+v)/log(1+max_depth))"
    else:
        nz = v[v > 0]
        cap = float(np.percentile(nz, HIT_PERCENTILE)) if nz.size else 1.0
        g = np.floor(255.0 * np.minimum(1.0, v / cap) + 0.5)
        desc = f"kind=hits hit_cap={cap!r} gray=round(255*min(1,v/hit_cap))"
    return np.clip(g, 0, 255).astype(np.uint8), desc


def pgm_bytes(gray: np.ndarray, comment: str) -> bytes:
    h, w = gray.shape
    header = f"P5\n# corrdyn {comment}\n{w} {h}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(gray, dtype=np.uint8).tobytes()


def _write(path, data: bytes):
    path = Path(path)
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_pgm(grid: DepthGrid, path) -> None:
    gray, desc = gray_levels(grid)
    _write(path, pgm_bytes(gray, desc))


def write_mask_pgm(mask: np.ndarray, path) -> None:
    gray = np.where(mask, 255, 0).astype(np.uint8)
    _write(path, pgm_bytes(gray, "kind=capacity-mask flagged=255"))


def write_csv(grid: DepthGrid, path) -> None:
    lines = [",".join(map(str, row)) for row in grid.values.tolist()]
    _write(path, ("\n".join(lines) + "\n").encode("ascii"))


def write_sidecar(grid: DepthGrid, path, **extra) -> None:
    meta = dict(grid.meta)
    meta.update(extra)
    _write(path, (json.dumps(meta, indent=2, sort_keys=True) + "\n").encode("utf-8"))


def write_outputs(grid: DepthGrid, out, csv_path=None) -> dict:
    """PGM at ``out``, metadata next to it (``.json``), a capacity mask
    (``.mask.pgm``) when pixels were flagged, and optionally a CSV dump."""
    out = Path(out)
    gray, desc = gray_levels(grid)
    _write(out, pgm_bytes(gray, desc))
    written = {"pgm": str(out)}
    mask_name = None
    if grid.capacity_mask is not None and grid.capacity_mask.any():
        mask_path = out.with_suffix(".mask.pgm")
        write_mask_pgm(grid.capacity_mask, mask_path)
        mask_name = mask_path.name
        written["mask"] = str(mask_path)
    if csv_path is not None:
        write_csv(grid, csv_path)
        written["csv"] = str(csv_path)
    side = out.with_suffix(".json")
    write_sidecar(grid, side, gray_mapping=desc, image=out.name, capacity_mask=mask_name)
    written["json"] = str(side)
    return written


def default_threads() -> int:
    env = os.environ.get("CORRDYN_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise InvalidArgumentError(f"CORRDYN_THREADS must be an integer, got {env!r}")
        if n < 1:
            raise InvalidArgumentError("CORRDYN_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1
