"""Command-line front end: ``pathbridge --job job.json --out report.json``.

Exit codes: 0 success, 2 infeasible problem, 1 invalid input or any other failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bridge, paths, qpaths
from .chain import ChainModel
from .errors import ConvergenceError, InfeasibleError, ModelError, PathBridgeError
from .io import (VERSION, ModelDocument, ParseError, decode_complex, dump_model, dumps, load_json,
                 parse_model, read_vector, validate)
from .quantum import apply_schrodinger, spectral_decompose
from .reversal import petz_reversal, verify_reversal

KINDS = ("mep1", "mep2", "mep3", "qreverse", "qmep1", "qmep2", "enumerate", "sanov-demo", "verify")
EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2

JOB_SCHEMA = {
    "type": "object",
    "required": ["version", "kind", "model"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": VERSION},
        "kind": {"enum": list(KINDS)},
        "model": {"type": ["string", "object"]},
        "constraints": {"type": "object"},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"tol": {"type": "number", "exclusiveMinimum": 0},
                           "max_iter": {"type": "integer", "minimum": 1}},
        },
        "options": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "output": {"type": "string"},
    },
}

QUANTUM_TOL = 1e-10


def _need(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ParseError(f"missing required field {key!r}", where)
    return mapping[key]


def _chain_only(doc: ModelDocument, kind: str) -> ChainModel:
    if doc.kind != "chain":
        raise ModelError(f"job kind {kind!r} needs a chain model")
    return doc.model


def _quantum_only(doc: ModelDocument, kind: str) -> qpaths.QuantumPathModel:
    if doc.kind != "quantum":
        raise ModelError(f"job kind {kind!r} needs a quantum model")
    return doc.model


def _path_entropy(sol: ChainModel, prior: ChainModel) -> float | None:
    try:
        return paths.path_relative_entropy(paths.enumerate_path_distribution(sol),
                                           paths.enumerate_path_distribution(prior))
    except PathBridgeError:
        return None  # too large to enumerate


def _bridge_report(sol: bridge.BridgeSolution, prior: ChainModel) -> dict:
    out = {
        "marginals": sol.marginals,
        "transitions": list(sol.chain.transitions),
        "flagged_rows": sol.unreachable,
    }
    if sol.pair is not None:
        out["phi"] = sol.pair.phi
        out["phihat"] = sol.pair.phihat
        out["normalization"] = sol.pair.normalization
    return out


def _classical(kind, doc, cons, cfg, job):
    prior = _chain_only(doc, kind)
    p0 = read_vector(_need(cons, "p0", "/constraints"), "p0") if kind in ("mep2", "mep3") else None
    p1 = read_vector(_need(cons, "p1", "/constraints"), "p1") if kind in ("mep1", "mep3") else None
    report = {}
    if kind == "mep3":
        diag = bridge.existence_check(prior, p0, p1)
        report["existence"] = {"status": diag.status.value, "final_positive": diag.final_positive,
                               "kernel_positive": diag.kernel_positive, "message": diag.message}
        if not diag.transport_feasible:
            raise InfeasibleError(diag.message)
        sol = bridge.mep3_bridge(prior, p0, p1, cfg)
        exponent = bridge.ld_exponent("mep3", prior, p0, p1, cfg, pair=sol.pair)
    elif kind == "mep1":
        sol = bridge.mep1_solution(prior, p1)
        exponent = bridge.ld_exponent("mep1", prior, p1=p1)
    else:
        sol = bridge.mep2_solution(prior, p0)
        exponent = bridge.ld_exponent("mep2", prior, p0=p0)
    report["solution"] = _bridge_report(sol, prior)
    report["cost"] = exponent
    report["path_relative_entropy"] = _path_entropy(sol.chain, prior)
    report["diagnostics"] = sol.diagnostics
    return report


def _qreverse(doc, cons, opts):
    model = _quantum_only(doc, "qreverse")
    t = int(opts.get("map", 0))
    if not 0 <= t < model.T:
        raise ParseError(f"map index {t} out of range", "/options/map")
    E = model.maps[t]
    if "rho_t" in cons:
        rho = decode_complex(cons["rho_t"], model.dim, "/constraints/rho_t")
    else:
        rho = model.sigma0
        for F in model.maps[:t]:
            rho = apply_schrodinger(F, rho)
    res = petz_reversal(E, rho, augment=True)
    check = verify_reversal(E, rho, tol=QUANTUM_TOL, seed=int(opts.get("seed", 0)), reversal=res.map)
    return {
        "solution": {"kraus": list(res.map.operators), "augmented_kraus": list(res.channel.operators)},
        "diagnostics": {"rank": res.rank, "cutoff": res.cutoff, "tp_defect_before": res.defect_before,
                        "tp_defect_after": res.defect_after, "revprop_residual": check.revprop_residual,
                        "consistency_residual": check.consistency_residual,
                        "joint_residual": check.joint_residual, "failures": check.failures},
    }


def _qmodel_report(m: qpaths.QuantumPathModel) -> dict:
    return {"sigma0": m.sigma0, "kraus": [list(E.operators) for E in m.maps]}


def _qmep1(doc, cons):
    model = _quantum_only(doc, "qmep1")
    rho_bar = decode_complex(_need(cons, "rho_bar_T", "/constraints"), model.dim, "/constraints/rho_bar_T")
    res = qpaths.qmep1_solve(model, rho_bar)
    WF, WE = qpaths.path_weights(res.model), qpaths.path_weights(res.prior)
    final = qpaths.conditioned_final(res.model)
    return {
        "solution": _qmodel_report(res.model),
        "cost": res.cost,
        "path_relative_entropy": qpaths.qpath_relative_entropy(WF, WE),
        "diagnostics": {
            "replaced_final_observable": res.replaced_final_observable,
            "final_state_residual": float(np.max(np.abs(final - rho_bar))),
            "harmonic_residuals": res.harmonic_residuals,
            "tp_defect": max(F.tp_defect_norm() for F in res.model.maps),
        },
    }


def _qmep2(doc, cons, opts):
    model = _quantum_only(doc, "qmep2")
    rho_bar = decode_complex(_need(cons, "rho_bar_0", "/constraints"), model.dim, "/constraints/rho_bar_0")
    alt = None
    if "alt_observables" in opts:
        alt = [spectral_decompose(decode_complex(X, model.dim, f"/options/alt_observables/{k}"))
               for k, X in enumerate(opts["alt_observables"])]
    res = qpaths.qmep2_solve(model, rho_bar, alt)
    return {
        "solution": _qmodel_report(res.model),
        "cost": res.cost,
        "bound": res.bound,
        "path_relative_entropy": res.path_entropy,
        "diagnostics": {"independence_residual": res.independence_residual},
    }


def _enumerate(doc):
    if doc.kind == "chain":
        table = paths.enumerate_path_distribution(doc.model)
        gap = float(np.max(np.abs(table.weights - paths.backward_path_distribution(doc.model).weights)))
    else:
        table = qpaths.path_weights(doc.model)
        gap = float(np.max(np.abs(table.weights - qpaths.backward_weights(doc.model).weights)))
    return {
        "solution": {"dims": list(table.dims), "weights": table.weights.ravel()},
        "diagnostics": {"total_mass": table.total(), "forward_backward_gap": gap},
    }


def _sanov(doc, cons, opts, seed):
    prior = _chain_only(doc, "sanov-demo")
    p0 = read_vector(cons["p0"], "p0") if "p0" in cons else None
    p1 = read_vector(cons["p1"], "p1") if "p1" in cons else None
    res = paths.sanov_demo(prior, opts.get("n_grid", [10, 20, 30, 40, 50]), int(opts.get("replicates", 200)), seed,
                           p1=p1, p0=p0, delta=float(opts.get("delta", 0.05)),
                           importance_sampling=bool(opts.get("importance_sampling", True)))
    return {
        "solution": {"rows": [{"n": r.n, "probability": r.probability, "rate": r.rate, "censored": r.censored,
                               "hits": r.hits} for r in res.rows]},
        "cost": res.exponent,
        "diagnostics": {"problem": res.kind, "delta": res.delta, "replicates": res.replicates,
                        "importance_sampling": res.importance_sampling},
    }


def _verify(doc, cons, opts, cfg, seed):
    problem = _need(opts, "problem", "/options")
    trials = int(opts.get("trials", 100))
    if problem == "qmep1":
        model = _quantum_only(doc, "verify")
        rho_bar = decode_complex(_need(cons, "rho_bar_T", "/constraints"), model.dim, "/constraints/rho_bar_T")
        res = qpaths.qmep1_solve(model, rho_bar)
        rep = qpaths.qmep1_competitors(res, trials, seed)
        return {"cost": rep.cost, "diagnostics": {"problem": problem, "trials": trials, "min_gap": rep.min_gap,
                                                   "violations": len(rep.violations), "ok": rep.ok}}
    if problem not in ("mep1", "mep2", "mep3"):
        raise ParseError(f"unknown problem {problem!r}", "/options/problem")
    prior = _chain_only(doc, "verify")
    p0 = read_vector(cons["p0"], "p0") if "p0" in cons else None
    p1 = read_vector(cons["p1"], "p1") if "p1" in cons else None
    sol = {"mep1": lambda: bridge.mep1_solution(prior, p1),
           "mep2": lambda: bridge.mep2_solution(prior, p0),
           "mep3": lambda: bridge.mep3_bridge(prior, p0, p1, cfg)}[problem]()
    rep = paths.verify_optimality(problem, prior, sol, trials, seed, p0=p0, p1=p1)
    return {"cost": rep.candidate_value, "diagnostics": {"problem": problem, "trials": trials,
                                                         "min_gap": rep.min_gap, "violations": len(rep.violations),
                                                         "ok": rep.ok}}


def run_job(job: dict, base: Path = Path(".")) -> tuple[dict, int]:
    """Execute a parsed job and return ``(report, exit_code)``.

    Validation problems raise; infeasibility is reported with exit code 2.
    """
    validate(job, JOB_SCHEMA)
    kind = job["kind"]
    model_src = job["model"]
    doc = parse_model(model_src if isinstance(model_src, dict) else base / model_src)
    solver = job.get("solver", {})
    cfg = bridge.SolverConfig(tol=float(solver.get("tol", 1e-12)), max_iter=int(solver.get("max_iter", 100_000)))
    seed = int(job.get("seed", 0))
    cons = job.get("constraints", {})
    opts = job.get("options", {})

    report = {
        "version": VERSION,
        "kind": kind,
        "status": "ok",
        "inputs": {"job": job, "model": dump_model(doc)},
        "tolerances": {"solver_tol": cfg.tol, "max_iter": cfg.max_iter, "quantum_tol": QUANTUM_TOL,
                       "stochastic_tol": 1e-12},
        "seed": seed,
    }
    if doc.labels is not None:
        report["states"] = list(doc.labels)
    try:
        if kind in ("mep1", "mep2", "mep3"):
            body = _classical(kind, doc, cons, cfg, job)
        elif kind == "qreverse":
            body = _qreverse(doc, cons, opts)
        elif kind == "qmep1":
            body = _qmep1(doc, cons)
        elif kind == "qmep2":
            body = _qmep2(doc, cons, opts)
        elif kind == "enumerate":
            body = _enumerate(doc)
        elif kind == "sanov-demo":
            body = _sanov(doc, cons, opts, seed)
        else:
            body = _verify(doc, cons, opts, cfg, seed)
    except InfeasibleError as exc:
        report.update(status="infeasible", cost=exc.cost, message=str(exc))
        return report, EXIT_INFEASIBLE
    report.update(body)
    return report, EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pathbridge", description="Maximum-entropy path-space problems.")
    p.add_argument("--job", required=True, help="job file (JSON, version v1)")
    p.add_argument("--out", help="report file (default: the job's output field, else stdout)")
    p.add_argument("--seed", type=int, help="override the job seed")
    p.add_argument("--tol", type=float, help="override the solver tolerance")
    p.add_argument("--max-iter", type=int, dest="max_iter", help="override the solver iteration budget")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job_path = Path(args.job)
        job = load_json(job_path)
        if not isinstance(job, dict):
            raise ParseError("job file must hold a JSON object")
        if args.seed is not None:
            job["seed"] = args.seed
        if args.tol is not None or args.max_iter is not None:
            job["solver"] = dict(job.get("solver", {}))
            if args.tol is not None:
                job["solver"]["tol"] = args.tol
            if args.max_iter is not None:
                job["solver"]["max_iter"] = args.max_iter
        report, code = run_job(job, job_path.parent)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (PathBridgeError, ValueError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    text = dumps(report)
    out = args.out or job.get("output")
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if code == EXIT_INFEASIBLE:
        print(f"infeasible: {report.get('message', '')}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
