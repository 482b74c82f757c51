"""Command line front end.

Exit codes: 0 success, 1 validation error, 2 solver non-convergence,
3 property violation.
"""
import argparse
import concurrent.futures
import csv
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .basis import diagonal_residual, displace_observable, is_nontrivial, preferred_basis
from .channels import random_io_instrument
from .coherence import (FORMULATIONS, SolverError, c_mio, hierarchy_report, io_lower_bound, l1_norm,
                        robustness, robustness_witness, strong_monotonicity_audit)
from .config import ENV_VAR, get_tolerances
from .linalg import ValidationError, load_matrix, matrix_to_doc
from .models import (SPIN_CONVENTION, parse_model, product_theta_state, random_diagonal_state,
                     random_observable, random_state, spin_x, superradiant_op, w_mixture)
from .sdp import default_backend

log = logging.getLogger("obscoherence")

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_VIOLATION = 0, 1, 2, 3

FIGURE1_STEPS = 21
FIGURE2_STEPS = 25
FAITHFUL_MAX_SITES = 4
# dense Schur matrix of the reduced program grows like d^6
REDUCED_MAX_DIM = 16

TRACE_COLUMNS = ("iter", "primal", "dual", "gap", "alpha_p", "alpha_d", "pinf", "dinf", "mu", "sigma")


# -- inputs ------------------------------------------------------------------------

def _load_inputs(args, need_state=True):
    obs = state = None
    for selector in args.model or []:
        kind, _, mat = parse_model(selector)
        if kind == "observable":
            obs = mat
        else:
            state = mat
    if args.observable:
        obs = load_matrix(args.observable)
    if getattr(args, "state", None):
        state = load_matrix(args.state)
    if obs is None:
        raise ValidationError("no observable given (use --observable FILE or --model NAME:ARGS)")
    if need_state and state is None:
        raise ValidationError("no state given (use --state FILE or --model NAME:ARGS)")
    return obs, state


def _tols(args):
    tols = get_tolerances()
    if getattr(args, "tol", None) is not None:
        tols = tols.replace(tol_gap=args.tol)
    return tols


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, default=_json_default)
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return matrix_to_doc(o)
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _write_trace(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for r in rows:
            w.writerow(["%.12g" % r[c] if isinstance(r.get(c), float) else r.get(c, "") for c in TRACE_COLUMNS])


# -- measure -----------------------------------------------------------------------

def cmd_measure(args):
    obs, state = _load_inputs(args)
    tols = _tols(args)
    res = c_mio(obs, state, args.formulation, tols, trace=bool(args.trace))
    rec = res.to_record(include_channel=res.channel is not None)
    if res.channel is not None and not (rec["diagnostics"]["channel_is_cptp"] and rec["diagnostics"]["channel_is_mio"]):
        log.warning("optimal channel failed its CPTP/MIO audit at %g", tols.mio_audit)
    if args.trace and res.solution is not None:
        _write_trace(res.solution.trace, args.trace)
    _write_json(rec, args.out)
    return EXIT_OK


# -- basis -------------------------------------------------------------------------

def cmd_basis(args):
    obs, _ = _load_inputs(args, need_state=False)
    tols = _tols(args)
    d = obs.shape[0]
    warnings = []
    if not is_nontrivial(obs, tols):
        warnings.append("trivial observable (proportional to the identity); emitting the identity basis")
        u = np.eye(d, dtype=np.complex128)
        rotations = 0
    else:
        basis = preferred_basis(obs, args.method, tols)
        u, rotations = basis.unitary, basis.rotations
    for w in warnings:
        log.warning(w)
    mp = displace_observable(obs, tols).m_prime
    transformed = u.conj().T @ mp @ u
    out = {
        "method": args.method,
        "unitary": matrix_to_doc(u),
        "rotations": rotations,
        "diagonal_residual": diagonal_residual(transformed),
        "unitarity_residual": float(np.max(np.abs(u.conj().T @ u - np.eye(d)))),
        "warnings": warnings,
    }
    _write_json(out, args.out)
    return EXIT_OK


# -- hierarchy ---------------------------------------------------------------------

def _report_record(rep, label):
    rec = rep.as_dict()
    rec["instance"] = label
    rec["violations"] = [{"pair": p, "magnitude": v} for p, v in rep.violations]
    return rec


def cmd_hierarchy(args):
    tols = _tols(args)
    records = []
    if args.random:
        d, n, seed = args.random
        if d < 2 or n < 1:
            raise ValidationError("--random needs d >= 2 and n >= 1")
        pairs = []
        for i in range(n):
            s = seed * 10_000 + i
            rho = random_state(d, s)
            m = random_observable(d, s + 5_000_000, zero_diagonal=True)
            pairs.append((f"seed={s}", m, rho))
    else:
        obs, state = _load_inputs(args)
        pairs = [("input", obs, state)]
    for label, m, rho in pairs:
        if args.witness:
            m = robustness_witness(rho, tols)[1]
        rep = hierarchy_report(m, rho, seed=args.seed, formulation=args.formulation, tols=tols)
        records.append(_report_record(rep, label))
    bad = [r for r in records if r["violations"]]
    failed = [r for r in records if r["errors"]]
    _write_json({"reports": records, "violations": len(bad), "errors": len(failed)}, args.out)
    if bad:
        return EXIT_VIOLATION
    if failed:
        return EXIT_SOLVER
    return EXIT_OK


# -- figures -----------------------------------------------------------------------

def sweep_point(kind, value, options):
    """One grid point of a figure sweep; module level so worker processes can pickle it."""
    t0 = time.perf_counter()
    tols = get_tolerances()
    if options.get("tol") is not None:
        tols = tols.replace(tol_gap=options["tol"])
    if kind == "figure1":
        m, rho = spin_x(3), w_mixture(float(value))
    else:
        n = options["n_active"] + options["n_padding"]
        m = superradiant_op(n)
        rho = product_theta_state(float(value), options["n_active"], options["n_padding"])
    res = c_mio(m, rho, options["formulation"], tols)
    row = {"c_l1": l1_norm(rho), "c_r": robustness(rho, tols), "c_mio": res.value}
    if options.get("io_lower"):
        row["c_io_lower"] = io_lower_bound(m, rho, seed=options.get("seed", 0), tols=tols)
    meta = {"iterations": res.iterations, "gap": res.gap, "formulation": res.formulation,
            "wall_time": time.perf_counter() - t0}
    return row, meta


def run_sweep(kind, grid, options, workers=1):
    """Evaluate the grid, ordered by grid index whatever the completion order."""
    if workers <= 1 or len(grid) <= 1:
        return [sweep_point(kind, v, options) for v in grid]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(sweep_point, kind, v, options) for v in grid]
        return [f.result() for f in futures]


def write_sweep(path, param, grid, results, io_lower=False):
    cols = ["c_l1", "c_r", "c_mio"] + (["c_io_lower"] if io_lower else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([param] + cols)
        for v, (row, _) in zip(grid, results):
            w.writerow(["%.12g" % v] + ["%.12g" % row[c] for c in cols])
    return cols


def sidecar_path(path):
    root, _ = os.path.splitext(path)
    return root + ".meta.json"


def _figure(args, kind, param, grid, options, observable, state_family):
    workers = args.workers or os.cpu_count() or 1
    t0 = time.perf_counter()
    results = run_sweep(kind, grid, options, workers)
    cols = write_sweep(args.out, param, grid, results, options.get("io_lower", False))
    meta = {
        "command": kind,
        "version": __version__,
        "parameter": param,
        "grid": [float(v) for v in grid],
        "columns": cols,
        "observable": observable,
        "state_family": state_family,
        "spin_convention": SPIN_CONVENTION,
        "options": options,
        "tolerances": get_tolerances().as_dict(),
        "tolerance_override_env": ENV_VAR if os.environ.get(ENV_VAR) else None,
        "backend": default_backend(),
        "workers": workers,
        "points": [dict(meta, index=i) for i, (_, meta) in enumerate(results)],
        "wall_time": time.perf_counter() - t0,
    }
    _write_json(meta, sidecar_path(args.out))
    return EXIT_OK


def _grid(lo, hi, steps):
    if steps < 2:
        raise ValidationError("--steps must be at least 2")
    return np.linspace(lo, hi, steps)


def cmd_figure1(args):
    grid = _grid(0.0, 1.0, args.steps)
    options = {"formulation": args.formulation, "tol": args.tol, "io_lower": args.io_lower, "seed": args.seed}
    return _figure(args, "figure1", "p", grid, options, "spin_x:3", "w_mixture(p)")


def cmd_figure2(args):
    n = args.n_active + args.n_padding
    if args.n_active < 2:
        raise ValidationError("--n-active must be at least 2 for the superradiant observable")
    form = args.formulation
    if form == "faithful" and n > FAITHFUL_MAX_SITES:
        raise ValidationError(f"the faithful program on {n} qubits exceeds the dense memory budget "
                              f"(limit {FAITHFUL_MAX_SITES}); use --formulation reduced")
    if 2 ** n > REDUCED_MAX_DIM:
        raise ValidationError(f"{n} qubits (d={2 ** n}) exceeds the dense solver budget (d <= {REDUCED_MAX_DIM})")
    grid = _grid(0.0, math.pi / 2, args.steps)
    options = {"formulation": form, "tol": args.tol, "io_lower": args.io_lower, "seed": args.seed,
               "n_active": args.n_active, "n_padding": args.n_padding}
    return _figure(args, "figure2", "theta", grid, options, f"superradiance:{n}",
                   f"product_theta_state(theta, {args.n_active}, {args.n_padding})")


# -- randomized property suites ------------------------------------------------------

def _suite_invariants(seed, count, tols):
    out = []
    for i in range(count):
        s = seed * 10_000 + i
        d = 2 + i % 2
        m = random_observable(d, s, zero_diagonal=True)
        rho = random_state(d, s + 1)
        base = c_mio(m, rho, tols=tols).value
        diag = c_mio(m, random_diagonal_state(d, s + 2), tols=tols).value
        mp = displace_observable(m, tols).m_prime
        checks = {
            "faithful_zero": (diag, diag <= 1e-6),
            "witness_lower": (float(np.trace(mp @ rho).real) - base, base >= float(np.trace(mp @ rho).real) - 1e-7),
        }
        for alpha in (0.5, 2.0):
            v = c_mio(alpha * m, rho, tols=tols).value
            err = abs(v - alpha * base)
            checks[f"scaling_{alpha}"] = (err, err <= 1e-6 * max(1.0, abs(alpha * base)))
        phases = np.exp(2j * np.pi * np.random.default_rng(s + 3).random(d))
        dd = np.diag(phases)
        v = c_mio(m, dd @ rho @ dd.conj().T, tols=tols).value
        checks["unitary_invariance"] = (abs(v - base), abs(v - base) <= 1e-6)
        out.append((s, checks))
    return out


def _suite_monotonicity(seed, count, tols):
    out = []
    for i in range(count):
        s = seed * 10_000 + i
        d = 2 + i % 2
        rho = random_state(d, s)
        m = random_observable(d, s + 1, zero_diagonal=True)
        inst = random_io_instrument(d, 2 + i % 3, s + 2)
        audit = strong_monotonicity_audit(m, rho, inst, tols=tols)
        out.append((s, {"strong_monotonicity": (audit.violation, audit.ok)}))
    return out


def _suite_duality(seed, count, tols):
    out = []
    for i in range(count):
        s = seed * 10_000 + i
        d = 2 + i % 2
        rho = random_state(d, s)
        m = random_observable(d, s + 1)
        res = {f: c_mio(m, rho, f, tols) for f in FORMULATIONS}
        vals = [r.value for r in res.values()]
        spread = max(vals) - min(vals)
        gap = max(r.gap / (1 + abs(r.raw_optimum)) for r in res.values())
        out.append((s, {"pairwise_agreement": (spread, spread <= 1e-6),
                        "certified_gap": (gap, gap <= 1e-7)}))
    return out


SUITES = {"invariants": _suite_invariants, "monotonicity": _suite_monotonicity, "duality": _suite_duality}
SUITE_COUNTS = {"invariants": 6, "monotonicity": 20, "duality": 10}


def run_suite(name, seed=0, count=None, tols=None):
    """Run a named property suite; returns a machine-readable summary."""
    tols = tols or get_tolerances()
    count = SUITE_COUNTS[name] if count is None else count
    instances = SUITES[name](seed, count, tols)
    violations = []
    worst = {}
    for s, checks in instances:
        for key, (mag, ok) in checks.items():
            worst[key] = max(worst.get(key, -math.inf), float(mag))
            if not ok:
                violations.append({"instance_seed": s, "check": key, "magnitude": float(mag)})
    return {"suite": name, "seed": seed, "instances": len(instances), "passed": not violations,
            "worst": worst, "violations": violations}


def cmd_check(args):
    summary = run_suite(args.suite, args.seed, args.count, _tols(args))
    _write_json(summary, args.out)
    return EXIT_OK if summary["passed"] else EXIT_VIOLATION


# -- entry point ---------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="obscoherence", description="Observable-induced coherence measures.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def inputs(sp, state=True):
        sp.add_argument("--observable", help="observable matrix document (JSON)")
        if state:
            sp.add_argument("--state", help="density matrix document (JSON)")
        sp.add_argument("--model", action="append",
                        help="named model, e.g. spin_x:3, superradiance:3, w_mixture:0.5, "
                             "product:0.785,3,0, max_coherent:4 (repeatable)")

    def common(sp):
        sp.add_argument("--tol", type=float, help="relative duality gap tolerance")
        sp.add_argument("--out", default="-", help="output file ('-' for stdout)")

    sp = sub.add_parser("measure", help="MIO coherence measure of a state for an observable")
    inputs(sp)
    sp.add_argument("--formulation", choices=("auto",) + FORMULATIONS, default="auto")
    sp.add_argument("--trace", help="write a per-iteration solver trace CSV here")
    common(sp)
    sp.set_defaults(func=cmd_measure)

    sp = sub.add_parser("basis", help="basis in which the displaced observable has zero diagonal")
    inputs(sp, state=False)
    sp.add_argument("--method", choices=("schur_horn", "fourier_mub"), default="schur_horn")
    common(sp)
    sp.set_defaults(func=cmd_basis)

    sp = sub.add_parser("hierarchy", help="evaluate the measure hierarchy")
    inputs(sp)
    sp.add_argument("--random", nargs=3, type=int, metavar=("D", "N", "SEED"),
                    help="N random (observable, state) pairs of dimension D")
    sp.add_argument("--witness", action="store_true",
                    help="replace the observable by the optimal robustness witness of the state")
    sp.add_argument("--formulation", choices=("auto",) + FORMULATIONS, default="auto")
    sp.add_argument("--seed", type=int, default=0, help="seed of the IO lower bound search")
    common(sp)
    sp.set_defaults(func=cmd_hierarchy)

    for name, steps, helptext in (("figure1", FIGURE1_STEPS, "spin_x(3) on the W mixture family"),
                                  ("figure2", FIGURE2_STEPS, "superradiance on product states")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--steps", type=int, default=steps)
        sp.add_argument("--formulation", choices=("auto", "faithful", "reduced"), default="reduced")
        sp.add_argument("--io-lower", action="store_true", help="add the c_io_lower column")
        sp.add_argument("--workers", type=int, default=None, help="worker processes (default: CPU count)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--out", required=True, help="CSV output; metadata goes to <out>.meta.json")
        if name == "figure2":
            sp.add_argument("--n-active", type=int, default=3)
            sp.add_argument("--n-padding", type=int, default=0)
        sp.set_defaults(func=cmd_figure1 if name == "figure1" else cmd_figure2)

    sp = sub.add_parser("check", help="randomized property suites")
    sp.add_argument("--suite", choices=sorted(SUITES), required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SolverError as exc:
        lo, hi = exc.bounds
        print(f"error: {exc}", file=sys.stderr)
        print(f"bounds: [{lo:.10g}, {hi:.10g}]", file=sys.stderr)
        return EXIT_SOLVER
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
