"""``corrdyn`` command line.

Exit codes: 0 success (or a true verdict), 1 a clean false verdict, 2 usage
errors, 3 capacity or budget refusals, 4 I/O failures.

Every long flag can also be given in a ``--config`` file of ``key = value``
lines, using the flag name without dashes; flags on the command line win.
"""
from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from pathlib import Path

from . import __version__
from .core import CorrespondenceParams, cycle_notation, monodromy_permutation
from .errors import (
    BudgetError,
    CapacityError,
    ContinuationError,
    CorrdynError,
    InvalidArgumentError,
    RefinementError,
)
from .misiurewicz import Candidate, ScanConfig, candidates_csv, refine, scan, verify
from .orbifold import SampleSpec, expansion_survey, ramification_data
from .orbits import OrbitConfig
from .region import Region
from .render import (
    NODE_BUDGET,
    PIXEL_BUDGET,
    RenderSpec,
    default_threads,
    render_julia_escape,
    render_julia_inverse,
    render_multibrot,
    write_outputs,
)

EXIT_OK, EXIT_FALSE, EXIT_USAGE, EXIT_RESOURCE, EXIT_IO = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def parse_complex(text: str) -> complex:
    """``"RE,IM"`` (or a bare real) to complex."""
    parts = str(text).replace(" ", "").split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected RE,IM, got {text!r}")


_COMPLEX_FLAGS = ("--c", "--center", "--start")
_COMPLEX_TOKEN = re.compile(r"^-[0-9.]")


def _join_negative_values(argv):
    """argparse reads ``--c -2,0`` as two flags; rewrite to ``--c=-2,0``."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _COMPLEX_FLAGS:
            nxt = next(it, None)
            if nxt is not None and _COMPLEX_TOKEN.match(nxt):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
            continue
        out.append(tok)
    return out


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def read_config(path) -> dict:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{no}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-")] = value
    return out


# ---------------------------------------------------------------------------
# parser


def _fmt(prog):
    return argparse.ArgumentDefaultsHelpFormatter(prog, max_help_position=32)


def _exponents(sp, p=4, q=2):
    sp.add_argument("--p", type=int, default=p, help="forward exponent p (p > q)")
    sp.add_argument("--q", type=int, default=q, help="backward exponent q (q >= 1)")


def _orbit_flags(sp, depth=None):
    if depth is not None:
        sp.add_argument("--depth", type=int, default=depth, help="orbit depth")
    sp.add_argument("--escape-radius", type=float, default=None,
                    help="override the computed escape radius")
    sp.add_argument("--dedup-tol", type=float, default=None,
                    help="merge tolerance; None means 1e-9*max(1,R)")
    sp.add_argument("--frontier-cap", type=int, default=200_000, help="max frontier nodes per level")
    sp.add_argument("--periodicity-tol", type=float, default=1e-6, help="cycle detection tolerance")
    sp.add_argument("--dedup", type=parse_bool, default=True, help="merge coincident frontier points")
    sp.add_argument("--probe-width", type=int, default=16,
                    help="beam width of the bounded-orbit probe (0 disables)")


def _window(sp, center="0,0", half_width=2.0, width=512, height=512):
    sp.add_argument("--center", type=parse_complex, default=parse_complex(center), help="window centre RE,IM")
    sp.add_argument("--half-width", type=float, default=half_width, help="half the window width")
    sp.add_argument("--half-height", type=float, default=None,
                    help="half the window height; None keeps pixels square")
    sp.add_argument("--width", type=int, default=width, help="raster width in pixels")
    sp.add_argument("--height", type=int, default=height, help="raster height in pixels")


def _threads(sp):
    sp.add_argument("--threads", type=int, default=None,
                    help="worker threads; None means $CORRDYN_THREADS or the CPU count")


def _render_out(sp):
    sp.add_argument("--out", default=None, help="output PGM path (sidecar .json written next to it)")
    sp.add_argument("--csv", default=None, help="optional CSV dump of the raw grid")
    sp.add_argument("--pixel-budget", type=int, default=PIXEL_BUDGET, help="max width*height")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corrdyn", description=__doc__.split("\n")[0], formatter_class=_fmt)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, description=help_, formatter_class=_fmt)
        sp.add_argument("--config", default=None, help="key = value file with flag defaults")
        return sp

    sp = add("multibrot", "render the parameter plane (membership of the critical point)")
    _exponents(sp)
    _window(sp, center="-0.5,0")
    sp.add_argument("--depth", type=int, default=60, help="max depth (sentinel for bounded pixels)")
    _orbit_flags(sp)
    _render_out(sp)
    _threads(sp)

    sp = add("julia", "render a filled Julia set by escape depth")
    _exponents(sp)
    sp.add_argument("--c", type=parse_complex, default=parse_complex("-2,0"), help="parameter RE,IM")
    _window(sp)
    sp.add_argument("--depth", type=int, default=60, help="max depth (sentinel for bounded pixels)")
    _orbit_flags(sp)
    _render_out(sp)
    _threads(sp)

    sp = add("inverse-julia", "render backward orbits of the critical point as hit counts")
    _exponents(sp)
    sp.add_argument("--c", type=parse_complex, default=parse_complex("-2,0"), help="parameter RE,IM")
    _window(sp)
    sp.add_argument("--mode", choices=["full-tree", "random"], default="full-tree", help="iteration mode")
    sp.add_argument("--iters", type=int, default=8, help="tree levels (full-tree) or 1/10 of the points (random)")
    sp.add_argument("--seed", type=int, default=0, help="random-mode seed")
    sp.add_argument("--start", type=parse_complex, default=parse_complex("0,0"), help="root of the backward tree")
    sp.add_argument("--node-budget", type=int, default=NODE_BUDGET, help="max p**iters in full-tree mode")
    _orbit_flags(sp)
    _render_out(sp)
    _threads(sp)

    sp = add("verify", "decide whether c is a Misiurewicz parameter")
    _exponents(sp)
    sp.add_argument("--c", type=parse_complex, default=None, help="parameter RE,IM (required)")
    _orbit_flags(sp, depth=20)
    sp.add_argument("--json", default=None, help="write the report here; None means stdout")

    sp = add("scan", "list candidate Misiurewicz parameters in a window")
    _exponents(sp)
    _window(sp, center="-2,0", half_width=0.1, width=200, height=100)
    sp.add_argument("--l-max", type=int, default=12, help="largest pre-period tried")
    sp.add_argument("--n-max", type=int, default=12, help="largest period tried")
    sp.add_argument("--scan-tol", type=float, default=1e-2, help="residual threshold")
    sp.add_argument("--branch-cap", type=int, default=64, help="stop following more bounded paths than this")
    _orbit_flags(sp)
    sp.add_argument("--out", default=None, help="output CSV; None means stdout")
    _threads(sp)

    sp = add("refine", "Newton-refine candidates and verify the results")
    _exponents(sp)
    sp.add_argument("--c", type=parse_complex, default=None, help="candidate parameter RE,IM")
    sp.add_argument("--ell", type=int, default=None, help="candidate pre-period")
    sp.add_argument("--n", type=int, default=None, help="candidate period")
    sp.add_argument("--candidates", default=None, help="scan CSV to refine instead of --c/--ell/--n")
    sp.add_argument("--branch-cap", type=int, default=64, help="stop following more bounded paths than this")
    _orbit_flags(sp, depth=20)
    sp.add_argument("--out", default=None, help="output JSON; None means stdout")

    sp = add("monodromy", "branch permutation after one loop around the critical point")
    _exponents(sp, p=3, q=2)
    sp.add_argument("--radius", type=float, default=1.0, help="loop radius")
    sp.add_argument("--basepoint-arg", type=float, default=0.0, help="argument of the base point")
    sp.add_argument("--json", default=None, help="also write the permutation as JSON")

    sp = add("expansion", "survey inverse-branch norms under the singular weight")
    _exponents(sp)
    sp.add_argument("--c", type=parse_complex, default=parse_complex("-2,0"), help="parameter RE,IM")
    _orbit_flags(sp, depth=20)
    sp.add_argument("--grid", type=int, default=201, help="global sample grid points per side")
    sp.add_argument("--near-grid", type=int, default=201, help="grid points per side around each ramified point")
    sp.add_argument("--sample-depth", type=int, default=10, help="membership depth a sample must reach")
    sp.add_argument("--delta-in", type=float, default=1e-4, help="min distance to the ramified points")
    sp.add_argument("--delta-out", type=float, default=1.0, help="max distance to the ramified points")
    sp.add_argument("--delta-near", type=float, default=0.05, help="radius of the near-singular band")
    sp.add_argument("--euclidean", type=parse_bool, default=False, help="measure norms without the weight")
    sp.add_argument("--out", default=None, help="output JSON; None means stdout")
    return ap


def _apply_config(parser: argparse.ArgumentParser, argv):
    pre = parser.parse_args(argv)
    if not getattr(pre, "config", None):
        return pre
    sp = parser._subparsers._group_actions[0].choices[pre.command]
    actions = {a.option_strings[0].lstrip("-"): a for a in sp._actions if a.option_strings}
    values = {}
    for key, raw in read_config(pre.config).items():
        act = actions.get(key)
        if act is None or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for {pre.command}")
        try:
            values[act.dest] = act.type(raw) if act.type else raw
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"config key {key!r}: {exc}")
        if act.choices is not None and values[act.dest] not in act.choices:
            raise UsageError(f"config key {key!r}: {raw!r} not in {list(act.choices)}")
    sp.set_defaults(**values)
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# commands


def _params(a) -> CorrespondenceParams:
    return CorrespondenceParams(a.p, a.q)


def _orbit_config(a) -> OrbitConfig:
    for name in ("frontier_cap",):
        if getattr(a, name) < 1:
            raise InvalidArgumentError(f"--{name.replace('_', '-')} must be >= 1")
    if a.probe_width < 0:
        raise InvalidArgumentError("--probe-width must be >= 0")
    return OrbitConfig(
        depth=getattr(a, "depth", 20) or 20,
        escape_radius=a.escape_radius,
        dedup_tol=a.dedup_tol,
        frontier_cap=a.frontier_cap,
        periodicity_tol=a.periodicity_tol,
        dedup=a.dedup,
        probe_width=a.probe_width,
    )


def _region(a) -> Region:
    if a.half_height is None:
        return Region.for_raster(a.center, a.half_width, a.width, a.height)
    return Region(a.center, a.half_width, a.half_height)


def _threads_of(a) -> int:
    n = a.threads if a.threads is not None else default_threads()
    if n < 1:
        raise InvalidArgumentError("--threads must be >= 1")
    return n


def _need(a, *names):
    for n in names:
        if getattr(a, n) is None:
            raise UsageError(f"--{n.replace('_', '-')} is required")


def _emit(text: str, path):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _spec(a, max_depth):
    return RenderSpec(
        a.width, a.height, max_depth, _orbit_config(a), _threads_of(a),
        pixel_budget=a.pixel_budget, node_budget=getattr(a, "node_budget", NODE_BUDGET),
    )


def _finish_render(grid, a):
    written = write_outputs(grid, a.out, a.csv)
    flagged = int(grid.capacity_mask.sum()) if grid.capacity_mask is not None else 0
    if flagged:
        print(f"{flagged} pixels exceeded frontier_cap; see {written['mask']}", file=sys.stderr)
        return EXIT_RESOURCE
    return EXIT_OK


def cmd_multibrot(a):
    _need(a, "out")
    _params(a)
    grid = render_multibrot(_region(a), _spec(a, a.depth), a.p, a.q)
    return _finish_render(grid, a)


def cmd_julia(a):
    _need(a, "out")
    _params(a)
    grid = render_julia_escape(a.c, _region(a), _spec(a, a.depth), a.p, a.q)
    return _finish_render(grid, a)


def cmd_inverse_julia(a):
    _need(a, "out")
    _params(a)
    spec = _spec(a, max(1, a.iters))
    grid = render_julia_inverse(a.c, _region(a), spec, a.p, a.q, a.iters, a.mode, a.seed, a.start)
    return _finish_render(grid, a)


def cmd_verify(a):
    _need(a, "c")
    _params(a)
    rep = verify(a.c, a.p, a.q, _orbit_config(a))
    _emit(_dump(rep.to_json()), a.json)
    if a.json is not None:
        print(f"verdict={str(rep.verdict).lower()} reason={rep.reason or '-'}")
    return EXIT_OK if rep.verdict else EXIT_FALSE


def _scan_config(a) -> ScanConfig:
    return ScanConfig(
        l_max=getattr(a, "l_max", 12), n_max=getattr(a, "n_max", 12),
        scan_tol=getattr(a, "scan_tol", 1e-2), branch_cap=a.branch_cap,
    )


def cmd_scan(a):
    _params(a)
    cands = scan(_region(a), (a.width, a.height), a.p, a.q, _orbit_config(a), _scan_config(a), _threads_of(a))
    _emit(candidates_csv(cands), a.out)
    return EXIT_OK


def _read_candidates(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    out = []
    for row in csv.DictReader(text.splitlines()):
        try:
            out.append(Candidate(
                complex(float(row["c_re"]), float(row["c_im"])),
                int(row["ell"]), int(row["n"]), float(row["residual"]),
            ))
        except (KeyError, ValueError) as exc:
            raise UsageError(f"{path}: malformed candidate row {row!r}") from exc
    return out


def cmd_refine(a):
    _params(a)
    if a.candidates is not None:
        cands = _read_candidates(a.candidates)
    else:
        _need(a, "c", "ell", "n")
        cands = [Candidate(a.c, a.ell, a.n, float("nan"))]
    cfg = _orbit_config(a)
    scfg = _scan_config(a)
    results = []
    any_true = False
    for cand in cands:
        entry = {"candidate": [cand.c.real, cand.c.imag], "ell": cand.ell, "n": cand.n}
        try:
            c = refine(cand, a.p, a.q, cfg, scfg)
        except RefinementError as exc:
            entry.update(refined=None, error=type(exc).__name__, message=str(exc))
        else:
            rep = verify(c, a.p, a.q, cfg)
            any_true |= rep.verdict
            entry.update(refined=[c.real, c.imag], report=rep.to_json())
        results.append(entry)
    _emit(_dump(results), a.out)
    return EXIT_OK if any_true else EXIT_FALSE


def cmd_monodromy(a):
    perm = monodromy_permutation(_params(a), a.radius, a.basepoint_arg)
    print(cycle_notation(perm))
    if a.json is not None:
        _emit(_dump({"p": a.p, "q": a.q, "permutation": list(perm), "cycles": cycle_notation(perm)}), a.json)
    return EXIT_OK


def cmd_expansion(a):
    params = _params(a)
    cfg = _orbit_config(a)
    rep = verify(a.c, a.p, a.q, cfg)
    if not rep.verdict:
        print(f"{a.c} is not verified as a Misiurewicz parameter ({rep.reason})", file=sys.stderr)
        return EXIT_FALSE
    data = ramification_data(rep, params, cfg)
    spec = SampleSpec(
        grid=a.grid, near_grid=a.near_grid, depth=a.sample_depth,
        delta_in=a.delta_in, delta_out=a.delta_out, delta_near=a.delta_near,
    )
    survey = expansion_survey(a.c, params, data, spec, euclidean=a.euclidean, cfg=cfg)
    out = survey.to_json()
    out.update(c=[a.c.real, a.c.imag], p=a.p, q=a.q, ramification=data.to_json())
    _emit(_dump(out), a.out)
    return EXIT_OK


COMMANDS = {
    "multibrot": cmd_multibrot,
    "julia": cmd_julia,
    "inverse-julia": cmd_inverse_julia,
    "verify": cmd_verify,
    "scan": cmd_scan,
    "refine": cmd_refine,
    "monodromy": cmd_monodromy,
    "expansion": cmd_expansion,
}


def main(argv=None) -> int:
    parser = build_parser()
    argv = _join_negative_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = _apply_config(parser, argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, InvalidArgumentError) as exc:
        print(f"corrdyn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CapacityError, BudgetError, ContinuationError) as exc:
        print(f"corrdyn: refused: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"corrdyn: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CorrdynError as exc:
        print(f"corrdyn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
