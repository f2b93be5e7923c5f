"""Command-line front end.

Subcommands: check-pair, scan, verify, chain, solve-bessel, estimate,
catalog.  Every run emits one machine-readable report (JSON by default,
CSV as flattened per-test rows) with the schema

  {"command", "config": {...}, "space_form": {"n", "kappa", "R"},
   "scans": [{"target", "verdict", "min", "argmin", "boundary_limit_R"}],
   "tests": [{"id", "params", "lhs", "rhs", "margin", "budget"}],
   "verdict", "seed", "timestamp"}

and exits 0 on pass, 1 on fail/violated, 2 on inconclusive, 64 on usage
errors, 74 on I/O failure.  Reports are written atomically; with the
same configuration and seed the report is byte-identical up to the
timestamp field.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from datetime import datetime, timezone
from typing import Optional

from . import catalog as cat
from . import pairs as pr
from . import sharpness as sh
from . import verify as vf
from .expr import ExprError, parse
from .geometry import SpaceForm
from .pairs import PairSpec

__all__ = ["main", "build_parser", "format_report"]

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 64
EXIT_IO = 74

_DEFAULT_GRID = 10_000
_DEFAULT_QUAD_TOL = 1e-10
_DEFAULT_TESTS = 50
_DEFAULT_SEED = 42


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rellich",
                description="Numerically certify Riccati-pair conditions and the "
                            "resulting Hardy/Rellich-type integral inequalities "
                            "on constant-curvature space forms.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, batch=False):
        sp.add_argument("--catalog", metavar="ID",
                        help=f"catalog entry id ({', '.join(cat.CATALOG_IDS)})")
        sp.add_argument("--n", type=int, default=5, help="dimension (default 5)")
        sp.add_argument("--kappa", type=float, default=None,
                        help="curvature parameter (default: entry-specific)")
        sp.add_argument("--lambda", dest="lam", type=float, default=0.0)
        sp.add_argument("--k", type=int, default=1, help="iteration depth")
        sp.add_argument("--R", type=float, default=None, help="radial domain bound")
        sp.add_argument("--r", dest="r_param", type=float, default=None,
                        help="value for the DSL parameter r")
        sp.add_argument("--c", type=float, default=None,
                        help="override the potential constant c")
        sp.add_argument("--grid", type=int, default=_DEFAULT_GRID)
        sp.add_argument("--quad-tol", type=float, default=_DEFAULT_QUAD_TOL)
        sp.add_argument("--tol", type=float, default=pr.DEFAULT_RESIDUAL_TOL)
        sp.add_argument("--output", "-o", help="write the report to this path")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        for role in ("G", "w", "W", "H", "v", "V", "z", "Z", "y", "X", "Y"):
            sp.add_argument(f"--{role}", dest=f"expr_{role}", metavar="DSL",
                            help=f"inline expression for {role}")
        if batch:
            sp.add_argument("--tests", type=int, default=_DEFAULT_TESTS)
            sp.add_argument("--seed", type=int, default=_DEFAULT_SEED)
            sp.add_argument("--modes", default="0",
                            help="comma-separated angular modes to cycle, e.g. 0,1,2")

    sp = sub.add_parser("check-pair", help="scan the defining residual(s)")
    common(sp)
    sp = sub.add_parser("scan", help="positivity-scan one target function")
    common(sp)
    sp.add_argument("--target", required=True,
                    help="E1 | E2 | residual | and any expression role (W, V, Z, ...)")
    sp = sub.add_parser("verify", help="verify one inequality on a seeded batch")
    common(sp, batch=True)
    sp.add_argument("--shape", choices=vf.SHAPES, default=None)
    sp = sub.add_parser("chain", help="verify a chained inequality end to end")
    common(sp, batch=True)
    sp = sub.add_parser("solve-bessel", help="disconjugacy certificate for a potential/pair")
    common(sp)
    sp.add_argument("--t0", type=float, default=None)
    sp.add_argument("--t1", type=float, default=None)
    sp = sub.add_parser("estimate", help="estimate the best constant of a shape")
    common(sp)
    sp.add_argument("--shape", choices=("delta-vs-gradrad", "gradrad-vs-usq", "chain"),
                    default="delta-vs-gradrad")
    sp.add_argument("--budget", type=int, default=500)
    sp.add_argument("--seed", type=int, default=_DEFAULT_SEED)
    sp = sub.add_parser("catalog", help="list or show catalog entries")
    sp.add_argument("action", choices=("list", "show"))
    sp.add_argument("id", nargs="?")
    sp.add_argument("--n", type=int, default=5)
    sp.add_argument("--kappa", type=float, default=None)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.0)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--R", type=float, default=None)
    return p


# ---------------------------------------------------------------------------
# pair sources


_INLINE_KINDS = (
    ("primal", ("G", "w", "W")),
    ("dual", ("H", "v", "V")),
    ("bessel-potential", ("z", "Z")),
    ("bessel-pair", ("X", "Y")),
)


def _inline_pair(args) -> Optional[PairSpec]:
    provided = {role: getattr(args, f"expr_{role}", None)
                for role in ("G", "w", "W", "H", "v", "V", "z", "Z", "y", "X", "Y")}
    provided = {k: v for k, v in provided.items() if v is not None}
    if not provided:
        return None
    for kind, roles in _INLINE_KINDS:
        if all(r in provided for r in roles):
            exprs = {r: parse(provided[r]) for r in roles}
            if kind == "bessel-pair" and "y" in provided:
                exprs["y"] = parse(provided["y"])
            params = {"lambda": args.lam, "k": float(args.k)}
            if args.R is not None:
                params["R"] = args.R
            if getattr(args, "r_param", None) is not None:
                params["r"] = args.r_param
            constant = args.c if args.c is not None else (
                0.25 if kind == "bessel-potential" else 1.0)
            return PairSpec(kind=kind, exprs=exprs, constant=constant, params=params)
    raise ValueError(
        "inline expressions do not form a complete pair "
        "(need G,w,W | H,v,V | z,Z | X,Y)")


def _resolve(args):
    """(entry or None, spec or None, space form) from --catalog / inline flags."""
    inline = _inline_pair(args)
    if (args.catalog is None) == (inline is None):
        raise ValueError("exactly one pair source required: --catalog or inline expressions")
    if inline is not None:
        kappa = args.kappa if args.kappa is not None else 0.0
        R = args.R if args.R is not None else math.inf
        return None, inline, SpaceForm(args.n, kappa, R)
    kappa = args.kappa if args.kappa is not None else (
        1.0 if args.catalog.startswith("hyp") else 0.0)
    entry = cat.build_entry(args.catalog, n=args.n, kappa=kappa, lam=args.lam,
                            k=args.k, R=args.R if args.R is not None else 1.0)
    R = args.R if args.R is not None else entry.space_form.R
    sf = SpaceForm(args.n, entry.space_form.kappa, R)
    if args.c is not None and "potential" in entry.specs:
        specs = dict(entry.specs)
        specs["potential"] = specs["potential"].with_constant(args.c)
        entry = cat.CatalogEntry(entry.id, entry.params, specs, entry.space_form,
                                 entry.chain, entry.default_shape, entry.provenance,
                                 entry.extras)
    return entry, None, sf


def _entry_specs(entry, spec):
    if spec is not None:
        return {spec.kind: spec}
    return entry.specs


def _dual_of(entry, spec, sf) -> PairSpec:
    """A dual spec for E1/E2 work: direct, via the primal change, or via the
    potential-to-dual construction."""
    specs = _entry_specs(entry, spec)
    if "dual" in specs:
        return specs["dual"]
    if spec is not None and spec.kind == "dual":
        return spec
    if spec is not None and spec.kind == "primal":
        return pr.primal_to_dual(spec, sf)
    if "primal" in specs:
        return pr.primal_to_dual(specs["primal"], sf)
    if "potential" in specs:
        return pr.from_bessel_potential(specs["potential"], "iii", sf.n)
    raise ValueError("no dual pair derivable from this source")


# ---------------------------------------------------------------------------
# report assembly


def _sf_dict(sf: SpaceForm) -> dict:
    return {"n": sf.n, "kappa": sf.kappa, "R": sf.R}


def _scan_row(s: vf.ScanSummary) -> dict:
    return {"target": s.target, "verdict": s.verdict, "min": s.min,
            "argmin": s.argmin, "boundary_limit_R": s.boundary_limit_R}


def _test_row(t: vf.TestRecord) -> dict:
    return {"id": t.id, "params": t.params, "lhs": t.lhs, "rhs": t.rhs,
            "margin": t.margin, "budget": t.budget}


def _report(command: str, config: dict, sf: SpaceForm, scans, tests,
            verdict: str, seed: int) -> dict:
    return {
        "command": command,
        "config": config,
        "space_form": _sf_dict(sf),
        "scans": [s if isinstance(s, dict) else _scan_row(s) for s in scans],
        "tests": [t if isinstance(t, dict) else _test_row(t) for t in tests],
        "verdict": verdict,
        "seed": seed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def format_report(report: dict, fmt: str = "json") -> str:
    """Serialize a report; JSON is schema-stable and key-sorted, CSV flattens
    the per-test rows."""
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["command", "verdict", "seed", "id", "family", "support_lo",
                     "support_hi", "alpha", "l", "lhs", "rhs", "margin", "budget"])
    for t in report["tests"]:
        p = t["params"]
        writer.writerow([report["command"], report["verdict"], report["seed"],
                         t["id"], p.get("family"), p.get("support_lo"),
                         p.get("support_hi"), p.get("alpha"), p.get("l"),
                         t["lhs"], t["rhs"], t["margin"], t["budget"]])
    return buf.getvalue()


def _write_output(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".report-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


_VERDICT_EXIT = {"pass": EXIT_PASS, "nonnegative": EXIT_PASS,
                 "fail": EXIT_FAIL, "violated": EXIT_FAIL,
                 "inconclusive": EXIT_INCONCLUSIVE,
                 "inconclusive-near-boundary": EXIT_INCONCLUSIVE}


def _config_dict(args, extra: Optional[dict] = None) -> dict:
    skip = {"output", "format", "command"}
    cfg = {k: v for k, v in sorted(vars(args).items())
           if k not in skip and not k.startswith("_") and _jsonable(v)}
    cfg.update(extra or {})
    return cfg


def _jsonable(v) -> bool:
    return isinstance(v, (int, float, str, bool, type(None), list, dict))


# ---------------------------------------------------------------------------
# command handlers


def _cmd_check_pair(args):
    entry, spec, sf = _resolve(args)
    r_hi = min(sf.R, 1e3)
    scans, equality = [], {}
    for name, p in sorted(_entry_specs(entry, spec).items()):
        rep = pr.residual_report(p, sf, grid=args.grid, t_lo=1e-6 * r_hi,
                                 t_hi=r_hi, n=sf.n, tol=args.tol)
        equality[name] = {"equality": rep.equality,
                          "max_abs_relative": rep.max_abs_relative}
        scans.append({"target": f"residual({name})",
                      "verdict": "nonnegative" if rep.nonnegative else "violated",
                      "min": rep.grid_min, "argmin": rep.grid_min_at,
                      "boundary_limit_R": None})
    verdict = "pass" if all(s["verdict"] == "nonnegative" for s in scans) else "fail"
    config = _config_dict(args, {"results": equality})
    return verdict, _report("check-pair", config, sf, scans, [], verdict,
                            _DEFAULT_SEED)


def _scan_target_expr(args, entry, spec, sf):
    specs = _entry_specs(entry, spec)
    if args.target in ("E1", "E2"):
        dual = _dual_of(entry, spec, sf)
        e = pr.e1_expr(dual) if args.target == "E1" else pr.e2_expr(dual)
        return e, dual.bindings(sf)
    if args.target == "residual":
        p = next(iter(specs.values()))
        return pr.residual_expr(p), p.bindings(sf)
    for p in specs.values():
        if args.target in p.exprs:
            return p.expr(args.target), p.bindings(sf)
    raise ValueError(f"no scan target {args.target!r} on this source")


def _cmd_scan(args):
    entry, spec, sf = _resolve(args)
    e, bindings = _scan_target_expr(args, entry, spec, sf)
    r_hi = min(sf.R, 1e3)
    rep = pr.scan_positivity(e, sf, grid=args.grid, t_lo=1e-6 * r_hi, t_hi=r_hi,
                             bindings=bindings)
    scan = {"target": args.target, "verdict": rep.verdict, "min": rep.min_value,
            "argmin": rep.argmin, "boundary_limit_R": rep.boundary_limit_R}
    config = _config_dict(args, {
        "sign_changes": [list(bracket) for bracket in rep.sign_changes],
        "boundary_limit_0": rep.boundary_limit_0})
    return rep.verdict, _report("scan", config, sf, [scan], [], rep.verdict,
                                _DEFAULT_SEED)


def _batch(args) -> vf.BatchSpec:
    modes = tuple(int(m) for m in str(args.modes).split(","))
    return vf.BatchSpec(count=args.tests, seed=args.seed, modes=modes)


def _cmd_verify(args):
    entry, spec, sf = _resolve(args)
    shape = args.shape or (entry.default_shape if entry else None)
    specs = _entry_specs(entry, spec)
    if shape is None:
        shape = {"dual": "delta-vs-gradrad", "primal": "gradrad-vs-usq",
                 "bessel-potential": "delta-vs-gradrad"}.get(
            next(iter(specs.values())).kind, "delta-vs-gradrad")
    if shape == "chain":
        return _cmd_chain(args)
    dual = primal = None
    if shape in ("delta-vs-gradrad", "delta-vs-grad"):
        dual = _dual_of(entry, spec, sf)
    else:
        if spec is not None and spec.kind == "primal":
            primal = spec
        elif "primal" in specs:
            primal = specs["primal"]
        else:
            primal = pr.dual_to_primal(_dual_of(entry, spec, sf), sf)
    case = vf.InequalityCase(shape=shape, sf=sf, batch=_batch(args), dual=dual,
                             primal=primal,
                             case_id=args.catalog or "inline")
    rep = vf.verify_case(case, quad_tol=args.quad_tol, grid=args.grid)
    config = _config_dict(args, {"notes": list(rep.notes), **rep.config})
    return rep.verdict, _report("verify", config, sf, rep.scans, rep.tests,
                                rep.verdict, rep.seed)


def _cmd_chain(args):
    entry, spec, sf = _resolve(args)
    if entry is None:
        raise ValueError("chain verification needs a catalog entry")
    if entry.chain is not None:
        chain = entry.chain
    elif "potential" in entry.specs:
        chain = cat.chain_from_potential(entry, sf.n)
    else:
        raise ValueError(f"entry {entry.id!r} has no chain")
    rep = vf.verify_chain(chain, sf, _batch(args), quad_tol=args.quad_tol,
                          grid=args.grid, case_id=chain.label)
    config = _config_dict(args, {"notes": list(rep.notes), **rep.config})
    return rep.verdict, _report("chain", config, sf, rep.scans, rep.tests,
                                rep.verdict, rep.seed)


def _cmd_solve_bessel(args):
    entry, spec, sf = _resolve(args)
    specs = _entry_specs(entry, spec)
    p = specs.get("potential") or spec
    if p is None or p.kind not in ("bessel-potential", "bessel-pair"):
        raise ValueError("solve-bessel needs a Bessel potential or pair")
    interval = (args.t0, args.t1) if args.t0 is not None and args.t1 is not None else None
    rep = pr.disconjugacy_check(p, interval=interval, n=sf.n)
    if rep.positive_solution:
        verdict = "pass"
    elif rep.first_zero is not None:
        verdict = "fail"
    else:
        verdict = "inconclusive"
    scan = {"target": "disconjugacy",
            "verdict": {"pass": "nonnegative", "fail": "violated",
                        "inconclusive": "inconclusive-near-boundary"}[verdict],
            "min": 0.0 if rep.positive_solution else -1.0,
            "argmin": rep.first_zero if rep.first_zero is not None else 0.0,
            "boundary_limit_R": None}
    config = _config_dict(args, {
        "positive_solution": rep.positive_solution,
        "first_zero": rep.first_zero,
        "log_t_first_zero": rep.log_t_first_zero,
        "status": rep.status, "steps": rep.steps})
    return verdict, _report("solve-bessel", config, sf, [scan], [], verdict,
                            _DEFAULT_SEED)


def _cmd_estimate(args):
    entry, spec, sf = _resolve(args)
    if entry is not None:
        pair, claimed = sh.sharpness_problem(entry, args.shape, sf)
    else:
        pair, claimed = spec, None
    est = sh.estimate_constant(sf, args.shape, pair, claimed=claimed,
                               budget=args.budget, seed=args.seed,
                               tol=args.quad_tol)
    verdict = "pass"
    if claimed is not None and est.estimate < claimed - 1e-6:
        verdict = "fail"  # an estimate below a certified constant flags a bug
    config = _config_dict(args, {
        "estimate": est.estimate, "claimed": est.claimed,
        "gap_ratio": est.gap_ratio, "evaluations": est.evaluations,
        "minimizer": {k: (v if _jsonable(v) else float(v))
                      for k, v in est.params.items()},
        "label": est.label})
    return verdict, _report("estimate", config, sf, [], [], verdict, args.seed)


def _cmd_catalog(args):
    if args.action == "list":
        sys.stdout.write("\n".join(cat.CATALOG_IDS) + "\n")
        return EXIT_PASS
    if not args.id:
        raise ValueError("catalog show needs an entry id")
    kappa = args.kappa if args.kappa is not None else (
        1.0 if args.id.startswith("hyp") else 0.0)
    entry = cat.build_entry(args.id, n=args.n, kappa=kappa, lam=args.lam,
                            k=args.k, R=args.R if args.R is not None else 1.0)
    doc = {
        "id": entry.id,
        "params": entry.params,
        "provenance": entry.provenance,
        "default_shape": entry.default_shape,
        "space_form": _sf_dict(entry.space_form),
        "specs": {name: {"kind": p.kind, "constant": p.constant,
                         "exprs": {role: str(e) for role, e in sorted(p.exprs.items())},
                         "note": p.note}
                  for name, p in sorted(entry.specs.items())},
        "chain": None if entry.chain is None else {
            "label": entry.chain.label,
            "links": [{"alpha": l.alpha, "label": l.label, "kind": l.spec.kind}
                      for l in entry.chain.links],
            "meta": entry.chain.meta,
        },
    }
    sys.stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return EXIT_PASS


_HANDLERS = {
    "check-pair": _cmd_check_pair,
    "scan": _cmd_scan,
    "verify": _cmd_verify,
    "chain": _cmd_chain,
    "solve-bessel": _cmd_solve_bessel,
    "estimate": _cmd_estimate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "catalog":
        try:
            return _cmd_catalog(args)
        except ValueError as exc:
            sys.stderr.write(f"rellich: {exc}\n")
            return EXIT_USAGE
    try:
        verdict, report = _HANDLERS[args.command](args)
    except (ValueError, ExprError) as exc:
        sys.stderr.write(f"rellich: {exc}\n")
        return EXIT_USAGE
    text = format_report(report, args.format)
    try:
        _write_output(text, args.output)
    except OSError as exc:
        sys.stderr.write(f"rellich: cannot write report: {exc}\n")
        return EXIT_IO
    return _VERDICT_EXIT.get(verdict, EXIT_INCONCLUSIVE)


if __name__ == "__main__":
    sys.exit(main())
