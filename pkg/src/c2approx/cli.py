"""Command-line front end.

Exit codes: 0 on success, 1 when a checked bound fails, 2 on usage errors.
Flags override values from ``--config``; the effective values are written
to the manifest of every run.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .bestapprox import best_approx, write_csv
from .errors import C2ApproxError
from .geometry import domain_from_json
from .mesh import _ChartRegion, build_partition
from .sampling import build_grid
from .smoothness import ModulusRequest, full_modulus
from .unity import global_unity, special_unity

COMMANDS = ("unity", "modulus", "bestapprox", "jackson", "inverse", "compare-tau", "bernstein")

DEFAULTS = {
    "domain": "disk",
    "f": None,
    "n": None,
    "r": 1,
    "p": "2",
    "q": None,
    "t": None,
    "A": 1.0,
    "m": 2.0,
    "trials": 10,
    "seed": 0,
    "resolution": None,
    "out": ".",
    "threads": None,
}

# per-command fallbacks for values without a global default
COMMAND_DEFAULTS = {
    "unity": {"n": "8", "resolution": 0},
    "modulus": {"f": "exp", "t": "0.125", "resolution": 32},
    "bestapprox": {"f": "exp", "n": "8", "resolution": 32},
    "jackson": {"n": "4,8,12,16,20,24", "resolution": 24},
    "inverse": {"n": "4,8,12,16,20,24", "resolution": 24},
    "compare-tau": {"t": "0.125,0.0625,0.03125,0.015625", "resolution": 24},
    "bernstein": {"n": "8,16", "resolution": 160},
}


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="c2approx", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--domain", help="domain name (disk, interval, ...) or JSON description")
    ap.add_argument("--f", help="test function name or comma list (default: the built-in suite)")
    ap.add_argument("--n", help="degree, or comma list of degrees")
    ap.add_argument("--r", type=int, help="difference order")
    ap.add_argument("--p", help="exponent (a number or inf)")
    ap.add_argument("--q", help="inner exponent of the averaged modulus")
    ap.add_argument("--t", help="scale, or comma list of scales")
    ap.add_argument("--A", type=float, help="scale factor of tau in compare-tau")
    ap.add_argument("--m", type=float, help="decay exponent of the partition of unity")
    ap.add_argument("--trials", type=int, help="random polynomials per degree (bernstein)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--resolution", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--config", help="JSON file with default values for the flags")
    ap.add_argument("--threads", type=int, help="worker threads for compiled kernels")
    return ap


def _float(s) -> float:
    s = str(s).strip().lower()
    if s in ("inf", "infinity", "+inf"):
        return math.inf
    try:
        return float(s)
    except ValueError as exc:
        raise UsageError(f"not a number: {s!r}") from exc


def _floats(s) -> list:
    return [_float(v) for v in str(s).split(",") if v.strip()]


def _ints(s) -> list:
    try:
        return [int(v) for v in str(s).split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"not an integer list: {s!r}") from exc


def _effective(args) -> dict:
    eff = dict(DEFAULTS)
    eff.update(COMMAND_DEFAULTS[args.command])
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        eff.update(cfg)
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            eff[k] = v
    eff["command"] = args.command
    return eff


def _functions(arg, default=None):
    if arg is None:
        return ex.test_suite() if default is None else ex.test_suite([default])
    names = [s.strip() for s in str(arg).split(",") if s.strip()]
    pool = {**ex.SUITE, **ex.EXTRA}
    bad = [n for n in names if n not in pool]
    if bad:
        raise UsageError(f"unknown functions {bad}; choose from {sorted(pool)}")
    return ex.test_suite(names)


def _domain(arg):
    try:
        return domain_from_json(arg)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc


def _config(eff) -> ex.ExperimentConfig:
    return ex.ExperimentConfig(resolution=int(eff["resolution"]), seed=int(eff["seed"]))


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------


def _unity_coefficients(fam):
    if hasattr(fam, "u_head"):
        return {"kind": "chart", "chart": fam.chart.name, "n": fam.n,
                "layer_coefficients": np.asarray(fam.u_head).tolist(),
                "box_coefficients": [fam.box.factor(0, j).coef.tolist() for j in range(fam.n)]}
    return {"kind": "box", "n": fam.n,
            "coefficients": [fam.factor(0, j).coef.tolist() for j in range(fam.n)]}


def cmd_unity(eff, out: Path):
    dom = _domain(eff["domain"])
    n = _ints(eff["n"])[0]
    m = float(eff["m"])
    rng = np.random.default_rng(int(eff["seed"]))
    lo, hi = (np.asarray(v, dtype=float) for v in dom.bbox)
    P = lo + (hi - lo) * rng.random((40_000, dom.dim))
    P = P[dom.contains(P)][:10_000]
    chart_res = []
    for ch in dom.charts:
        su = special_unity(build_partition(ch, n), m)
        Q = _ChartRegion(ch, [-ch.b] * ch.d, [ch.b] * ch.d, 0.0, 1.0).sample(64)[0]
        chart_res.append(float(np.abs(su.evaluate(Q).reshape(len(Q), -1).sum(axis=1) - 1).max()))
    gu = global_unity(dom, n, m)
    glob = float(np.abs(gu.evaluate_sum(P) - 1.0).max())
    chart_max = max(chart_res) if chart_res else 0.0
    dump = {"n": n, "m": m, "degree": gu.degree, "members": len(gu),
            "centers": gu.centers.tolist(),
            "families": [_unity_coefficients(f) for f in gu.families]}
    _write_json(out / "unity_coefficients.json", dump)
    summary = {"chart_residual": chart_max, "global_residual": glob, "points": len(P)}
    ok = chart_max < 1e-7 and glob < 1e-6
    print(f"unity n={n} chart_residual={chart_max:.3e} global_residual={glob:.3e}")
    return ok, summary


def cmd_modulus(eff, out: Path):
    dom = _domain(eff["domain"])
    fn = _functions(eff["f"])[0]
    grid = build_grid(dom, int(eff["resolution"]), seed=int(eff["seed"]))
    ts = _floats(eff["t"])
    reports = []
    for t in ts:
        req = ModulusRequest(fn, r=int(eff["r"]), p=_float(eff["p"]), t=t, seed=int(eff["seed"]))
        reports.append(full_modulus(req, dom, grid))
    (out / "modulus.json").write_text("[" + ",\n".join(r.to_json() for r in reports) + "]\n")
    vals = [r.value for r in reports]
    print(" ".join(f"{v:.6g}" for v in vals))
    return True, {"values": vals}


def cmd_bestapprox(eff, out: Path):
    dom = _domain(eff["domain"])
    fn = _functions(eff["f"])[0]
    grid = build_grid(dom, int(eff["resolution"]), seed=int(eff["seed"]))
    p = _float(eff["p"])
    res = [best_approx(fn, grid, n, p) for n in _ints(eff["n"])]
    write_csv(res, out / "bestapprox.csv")
    print(" ".join(f"E_{r.n}={r.error:.6g}" for r in res))
    return True, {"errors": [r.error for r in res]}


def _ratio_summary(tab) -> tuple[bool, dict]:
    spread = tab.spread()
    worst = max(spread.values()) if spread else 0.0
    mx = max((max(v) for v in tab.ratios().values()), default=0.0)
    print(f"{tab.name}: max ratio {mx:.6g}, worst max/min {worst:.6g} (bound {tab.bound:g})")
    return tab.passed, {"spread": spread, "max_ratio": mx}


def _study(eff, out: Path, kind):
    dom = _domain(eff["domain"])
    cfg = _config(eff)
    suite = _functions(eff["f"])
    r = int(eff["r"])
    p = _float(eff["p"])
    if kind == "jackson":
        tab = ex.run_jackson(dom, suite, r, p, _ints(eff["n"]), cfg)
    elif kind == "inverse":
        tab = ex.run_inverse(dom, suite, r, p, _ints(eff["n"]), cfg)
    else:
        q = _float(eff["q"]) if eff["q"] is not None else p
        tab = ex.run_tau_compare(dom, suite, r, p, q, _floats(eff["t"]), float(eff["A"]), cfg)
    ex.emit_report([tab], out / kind, cfg, extra=eff)
    return _ratio_summary(tab)


def cmd_bernstein(eff, out: Path):
    dom = _domain(eff["domain"])
    if not dom.charts:
        raise UsageError("the domain has no boundary charts")
    ch = dom.charts[0]
    ns = _ints(eff["n"])
    tab = ex.run_bernstein_check(ch, ns, _float(eff["p"]), int(eff["trials"]),
                                 resolution=int(eff["resolution"]), seed=int(eff["seed"]))
    cfg = _config(eff)
    ex.emit_report([tab], out / "bernstein", cfg, extra=eff)
    const = ex.bernstein_constants(tab)
    growth = {}
    for order in {k[0] for k in const}:
        vals = [const[(order, n)] for n in ns]
        growth[order] = max(vals) / min(vals) if min(vals) > 0 else math.inf
    worst = max(growth.values()) if growth else 1.0
    print(f"bernstein: constants {max(const.values()):.6g} max, worst growth {worst:.4g} (bound 2)")
    return worst < 2.0, {"constants": {f"{k[0]}@{k[1]}": v for k, v in const.items()}, "growth": growth}


HANDLERS = {
    "unity": cmd_unity,
    "modulus": cmd_modulus,
    "bestapprox": cmd_bestapprox,
    "jackson": lambda e, o: _study(e, o, "jackson"),
    "inverse": lambda e, o: _study(e, o, "inverse"),
    "compare-tau": lambda e, o: _study(e, o, "compare-tau"),
    "bernstein": cmd_bernstein,
}


def _set_threads(k):
    if k is None:
        return
    if k < 1:
        raise UsageError("--threads must be positive")
    try:
        import numba

        numba.set_num_threads(min(k, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        os.environ["OMP_NUM_THREADS"] = str(k)


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        eff = _effective(args)
        _set_threads(eff["threads"])
        out = Path(eff["out"])
        out.mkdir(parents=True, exist_ok=True)
        ok, summary = HANDLERS[args.command](eff, out)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"c2approx: error: {exc}", file=sys.stderr)
        return 2
    except (C2ApproxError, ValueError) as exc:
        print(f"c2approx: error: {exc}", file=sys.stderr)
        return 2
    _write_json(out / f"{args.command}_manifest.json", {"run": eff, "passed": ok, "summary": summary})
    return 0 if ok else 1
