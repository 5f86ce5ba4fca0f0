"""Command-line interface: protocol simulation, cheating analysis, bound
evaluation and SDP solving, with machine-readable JSON reports.

Exit codes: 0 success, 2 usage or validation problem, 3 numerical failure.
Reports are JSON on stdout; ``--pretty`` adds a human-readable table on
stderr, ``--csv PATH`` flattens numeric results into CSV rows.  With a fixed
``--seed`` and ``--no-meta`` the JSON output is byte-identical across runs.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, bounds, cheat, fot, model, otcore, protocols, sdp
from .qlin import DimensionError, QlinValidationError, RankError

_USAGE_ERRORS = (bounds.DomainError, model.SpecValidationError, KeyError,
                 DimensionError, QlinValidationError, RankError,
                 cheat.PreconditionError)

N_CHUNKS = 32  # fixed Monte-Carlo chunking so --jobs never changes the numbers

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Monte-Carlo engine (picklable workers, fixed chunking)
# ---------------------------------------------------------------------------

def _adversary_for(attack: str):
    return {
        "basis": cheat.alice_basis_attack,
        "superposition": cheat.bob_superposition_attack,
        "parity": cheat.bob_parity_attack,
    }[attack]().program


def _mc_chunk(args) -> dict:
    protocol_name, attack, side, count, seed = args
    proto = protocols.build(protocol_name)
    rng = np.random.default_rng(seed)
    counts: dict = {}
    if attack is None:
        for _ in range(count):
            res = otcore.run_protocol(proto, otcore.RandomChoices(rng))
            key = protocols.outcome_labels(protocol_name, res)
            counts[key] = counts.get(key, 0) + 1
        return {"outcomes": counts}
    program = _adversary_for(attack)
    hits = {"success": 0, "abort": 0}
    for _ in range(count):
        run = otcore.scripted_adversary_run(proto, program, side, rng)
        if run.aborted[("bob" if side == "alice" else "alice")]:
            hits["abort"] += 1
        if _attack_success(attack, side, run):
            hits["success"] += 1
    return hits


def _attack_success(attack: str, side: str, run: otcore.AdversaryRun) -> bool:
    honest = run.honest_output
    if honest == otcore.ABORT:
        return False
    guess = run.adversary.guess
    if attack == "basis":
        return guess["b"] == honest[0]
    if attack == "superposition":
        return (guess["x0"], guess["x1"]) == honest
    if attack == "parity":
        return guess["parity"] == (honest[0] ^ honest[1])
    raise KeyError(attack)


def _chunks(total: int) -> list[int]:
    base, extra = divmod(total, N_CHUNKS)
    return [base + (1 if i < extra else 0) for i in range(N_CHUNKS)]


def run_montecarlo(protocol_name: str, trials: int, seed: int, jobs: int,
                   attack: str | None = None, side: str | None = None) -> dict:
    seeds = np.random.SeedSequence(seed).spawn(N_CHUNKS)
    work = [(protocol_name, attack, side, count, s)
            for count, s in zip(_chunks(trials), seeds) if count > 0]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_mc_chunk, work))
    else:
        parts = [_mc_chunk(w) for w in work]
    if attack is None:
        counts: dict = {}
        for part in parts:
            for key, v in part["outcomes"].items():
                counts[key] = counts.get(key, 0) + v
        return {"counts": {f"{a}|{b}": v for (a, b), v in sorted(counts.items())}}
    success = sum(p["success"] for p in parts)
    abort = sum(p["abort"] for p in parts)
    rate = success / trials
    sigma = math.sqrt(max(rate * (1 - rate), 1.0 / trials) / trials)
    return {"trials": trials, "success_rate": rate, "sigma": sigma,
            "honest_abort_rate": abort / trials}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _load_spec_arg(name_or_path: str) -> model.ProtocolSpec:
    if name_or_path in protocols.NAMES:
        try:
            return protocols.load_bundled(name_or_path)
        except FileNotFoundError:
            return protocols.build_spec(name_or_path)
    if os.path.exists(name_or_path):
        try:
            spec = model.load_spec(name_or_path)
        except (json.JSONDecodeError, model.SpecValidationError, KeyError) as exc:
            raise UsageError(f"malformed spec file {name_or_path!r}: {exc}") from exc
        violations = model.validate(spec)
        if violations:
            raise UsageError(f"invalid spec {name_or_path!r}: " + "; ".join(violations[:3]))
        return spec
    raise UsageError(
        f"unknown protocol {name_or_path!r}: not one of {list(protocols.NAMES)} and no such file")


def cmd_simulate(args) -> dict:
    results: dict = {}
    if args.protocol == "fot":
        cf = _parse_cf(args.cf)
        rng = np.random.default_rng(args.seed)
        if args.trials > 0:
            counts: dict = {}
            aborts = 0
            for _ in range(args.trials):
                run = fot.fot_run(args.n, args.k, cf, rng)
                if run.aborted:
                    aborts += 1
                    continue
                key = f"b={{{','.join(map(str, run.b))}}}|x={''.join(map(str, run.x))}"
                counts[key] = counts.get(key, 0) + 1
            results["counts"] = dict(sorted(counts.items()))
            results["abort_rate"] = aborts / args.trials
            results["trials"] = args.trials
        joint, bias = bounds.fot_lower(args.n, args.k)
        results["exact"] = {
            "consistent_outcomes": math.comb(args.n, args.k) * 2 ** args.n,
            "joint_probability": joint,
            "tolerance": 0.0,
        }
        return results

    spec = _load_spec_arg(args.protocol)
    run = model.run_honest(spec)
    results["exact_distribution"] = {
        f"{a}|{b}": p for (a, b), p in sorted(run.outcome_distribution.items())}
    results["tolerance"] = 1e-9
    results["norm_drift"] = run.norm_drift
    if args.trials > 0:
        if args.protocol not in protocols.NAMES:
            raise UsageError("sampled trials need a named protocol, not a spec file")
        mc = run_montecarlo(args.protocol, args.trials, args.seed, args.jobs)
        counts = mc["counts"]
        expected = {f"{a}|{b}": p * args.trials
                    for (a, b), p in run.outcome_distribution.items()}
        chi2 = sum((counts.get(k, 0) - e) ** 2 / e for k, e in expected.items())
        from scipy.stats import chi2 as chi2_dist
        dof = max(len(expected) - 1, 1)
        results["sampled"] = {
            "trials": args.trials,
            "counts": counts,
            "chi_square": chi2,
            "chi_square_p_value": float(chi2_dist.sf(chi2, dof)),
        }
    return results


_ATTACKS = {
    ("qutrit-ot", "alice"): ("basis", "optimal"),
    ("qutrit-ot", "bob"): ("superposition", "parity", "optimal"),
    ("qutrit-commitment-cf", "alice"): ("optimal",),
    ("qutrit-commitment-cf", "bob"): ("optimal",),
    ("announce-coin", "alice"): ("optimal",),
    ("announce-coin", "bob"): ("optimal",),
}


def _qutrit_cheat_report(party: str, attack: str, args) -> cheat.CheatReport:
    if party == "alice":
        strat = cheat.alice_basis_attack()
        upper_value, _ = cheat.helstrom(*cheat.qutrit_reduced_states())
        report = cheat.CheatReport(
            party="alice", target=strat.target,
            lower_bound={"value": strat.exact_value, "strategy": strat.name,
                         "tolerance": 1e-12},
            upper_bound={"value": upper_value, "certificate": "helstrom-trace-norm",
                         "tolerance": 1e-12},
            seed=args.seed,
            extras={"bob_abort_probability": strat.extras["bob_abort_probability"]})
        return report
    if attack == "parity":
        strat = cheat.bob_parity_attack()
        return cheat.CheatReport(
            party="bob", target=strat.target,
            lower_bound={"value": strat.exact_value, "strategy": strat.name,
                         "tolerance": 1e-12},
            upper_bound={"value": 1.0, "certificate": "trivial", "tolerance": 0.0},
            seed=args.seed,
            extras={"single_bit_success": strat.extras["single_bit_success"],
                    "alice_abort_probability": strat.extras["alice_abort_probability"]})
    strat = cheat.bob_superposition_attack()
    disc_value, _ = cheat.optimal_discrimination(cheat.post_phase_states())
    return cheat.CheatReport(
        party="bob", target=strat.target,
        lower_bound={"value": strat.exact_value, "strategy": strat.name,
                     "tolerance": 1e-12},
        upper_bound={"value": cheat.nayak_bound(3, 4),
                     "certificate": "encoding-dimension-cap",
                     "discrimination_sdp": disc_value,
                     "tolerance": 1e-6},
        seed=args.seed,
        extras={"alice_abort_probability": strat.extras["alice_abort_probability"]})


def _sdp_cheat_report(protocol: str, party: str, args) -> cheat.CheatReport:
    spec = _load_spec_arg(protocol)
    target = args.target
    if target is None:
        target = "0" if party == "bob" else model.format_bob_label((1,), (0,))
    problem = sdp.build_cheating_sdp(spec, party, target)
    solution = sdp.solve_sdp(problem, tol=args.tol)
    check = sdp.verify_dual_certificate(problem, solution, atol=1e-6)
    lower = {"value": solution.primal_value, "strategy": "sdp-primal",
             "tolerance": args.tol}
    if args.oracle:
        brute = sdp.brute_force_cheat(spec, party, target, restarts=args.restarts,
                                      seed=args.seed)
        lower = {"value": brute, "strategy": "see-saw-unitary-search",
                 "tolerance": 2e-3}
    return cheat.CheatReport(
        party=party, target=target,
        lower_bound=lower,
        upper_bound={"value": solution.dual_value, "certificate": "sdp-dual",
                     "certificate_verified": check.passed,
                     "certificate_residual": check.max_residual,
                     "tolerance": args.tol},
        seed=args.seed,
        extras={"sdp_primal": solution.primal_value,
                "residuals": solution.residuals})


def cmd_cheat(args) -> dict:
    key = (args.protocol, args.party)
    if key not in _ATTACKS:
        raise UsageError(f"no attacks available for {args.protocol!r} / {args.party!r}")
    attack = args.attack or "optimal"
    if attack not in _ATTACKS[key]:
        raise UsageError(
            f"attack {attack!r} not available for {key}; choose from {_ATTACKS[key]}")
    if args.protocol == "qutrit-ot":
        report = _qutrit_cheat_report(args.party, attack, args)
    else:
        report = _sdp_cheat_report(args.protocol, args.party, args)
    out = {"cheat_report": report.as_dict()}
    if args.trials > 0 and args.protocol == "qutrit-ot":
        mc_attack = "basis" if args.party == "alice" else (
            "parity" if attack == "parity" else "superposition")
        out["sampled"] = run_montecarlo(args.protocol, args.trials, args.seed,
                                        args.jobs, attack=mc_attack, side=args.party)
    return out


def cmd_bound(args) -> dict:
    name = args.name
    if name == "ot-lower":
        closed = bounds.ot_lower_bound_epsilon()
        bisect = bounds.ot_lower_bound_epsilon_bisection()
        return {"epsilon_closed_form": closed,
                "epsilon_bisection": bisect,
                "difference": abs(closed - bisect),
                "tolerance": 1e-9}
    if name == "f":
        if args.z is None:
            raise UsageError("bound f needs --z")
        return {"z": args.z, "f": bounds.f(args.z),
                "f_bisection": bounds.f(args.z, force_bisection=True),
                "tolerance": 1e-9}
    if name == "g":
        if args.x is None:
            raise UsageError("bound g needs --x")
        return {"x": args.x, "g": bounds.g(args.x), "tolerance": 0.0}
    if name == "kitaev-product":
        if args.a is None or args.b is None:
            raise UsageError("bound kitaev-product needs --a and --b")
        chk = bounds.kitaev_product_check(args.a, args.b)
        return {"a": args.a, "b": args.b, "product": chk.product,
                "passed": chk.passed, "margin": chk.margin, "tolerance": 1e-9}
    if name == "fot-lower":
        joint, bias = bounds.fot_lower(args.n, args.k)
        return {"n": args.n, "k": args.k, "joint_probability": joint,
                "forcing_bias": bias, "tolerance": 0.0}
    if name == "fot-upper":
        if args.gamma is None:
            raise UsageError("bound fot-upper needs --gamma")
        a_bound, b_bound, delta = bounds.fot_upper(args.n, args.k, args.gamma)
        return {"n": args.n, "k": args.k, "gamma": args.gamma,
                "a_bound": a_bound, "b_bound": b_bound,
                "required_delta": delta, "tolerance": 1e-12}
    raise UsageError(f"unknown bound {name!r}")


def cmd_sdp(args) -> dict:
    spec = _load_spec_arg(args.spec)
    problem = sdp.build_cheating_sdp(spec, args.party, args.target)
    solution = sdp.solve_sdp(problem, tol=args.tol)
    check = sdp.verify_dual_certificate(problem, solution, atol=1e-6)
    out = {
        "protocol": spec.name,
        "party": args.party,
        "target": args.target,
        "primal_value": solution.primal_value,
        "dual_value": solution.dual_value,
        "tolerance": args.tol,
        "residuals": solution.residuals,
        "solver": solution.solver,
        "certificate": {"passed": check.passed,
                        "max_residual": check.max_residual,
                        "details": check.details},
        "n_constraints": len(problem.constraints),
        "meta": problem.meta,
    }
    if args.oracle:
        brute = sdp.brute_force_cheat(spec, args.party, args.target,
                                      restarts=args.restarts, seed=args.seed)
        out["oracle_lower_bound"] = brute
        out["oracle_within"] = {"value": solution.primal_value - brute,
                                "tolerance": 2e-3}
    return out


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------

def _flatten(prefix: str, value, rows: list):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            _flatten(f"{prefix}[{i}]", v, rows)
    elif isinstance(value, (int, float, bool)):
        rows.append((prefix, value))


def _emit(report: dict, args) -> None:
    payload = json.dumps(report, sort_keys=True)
    sys.stdout.write(payload + "\n")
    if args.csv:
        rows: list = []
        _flatten("", report, rows)
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["key", "value"])
            writer.writerows(rows)
    if args.pretty:
        rows = []
        _flatten("", report, rows)
        width = max((len(k) for k, _ in rows), default=0)
        for k, v in rows:
            sys.stderr.write(f"{k:<{width}}  {v}\n")


def _parse_cf(text: str) -> fot.CfPrimitive:
    if text.startswith("ideal:"):
        return fot.CfPrimitive.ideal(float(text.split(":", 1)[1]))
    if text == "ideal":
        return fot.CfPrimitive.ideal(0.5)
    if text == "qutrit-commitment-cf":
        return fot.CfPrimitive.simulated(protocols.qutrit_commitment_cf(),
                                         protocols.COMMITMENT_CF_MAX_CHEAT)
    raise UsageError(f"unknown CF primitive {text!r}; use ideal:C or qutrit-commitment-cf")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otlab",
        description="Simulate and analyze quantum oblivious-transfer and "
                    "coin-flipping protocols.")
    parser.add_argument("--seed", type=int, default=0, help="PRNG seed (default 0)")
    parser.add_argument("--trials", type=int, default=0,
                        help="Monte-Carlo trials; 0 keeps exact results only")
    parser.add_argument("--tol", type=float, default=1e-4,
                        help="solver tolerance for SDP-backed results")
    parser.add_argument("--pretty", action="store_true",
                        help="also print a human-readable table on stderr")
    parser.add_argument("--csv", metavar="PATH", help="write flattened results as CSV")
    parser.add_argument("--no-meta", action="store_true",
                        help="omit versions and wall-clock from the report")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for independent trials")
    parser.add_argument("--oracle", action="store_true",
                        help="also run the brute-force strategy search")
    parser.add_argument("--restarts", type=int, default=20,
                        help="random restarts for the brute-force search")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="honest execution statistics")
    p.add_argument("protocol", help="protocol name, spec file, or 'fot'")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--cf", default="ideal:0.5", help="CF primitive for fot runs")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cheat", help="cheating strategies and their values")
    p.add_argument("protocol")
    p.add_argument("--party", required=True, choices=("alice", "bob"))
    p.add_argument("--attack", default=None, help="attack name or 'optimal'")
    p.add_argument("--target", default=None, help="target outcome label for SDP attacks")
    p.set_defaults(func=cmd_cheat)

    p = sub.add_parser("bound", help="bound algebra evaluation")
    p.add_argument("name", choices=("ot-lower", "f", "g", "kitaev-product",
                                    "fot-lower", "fot-upper"))
    p.add_argument("--z", type=float, default=None)
    p.add_argument("--x", type=float, default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--gamma", type=float, default=None)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("sdp", help="build, solve and certify a cheating SDP")
    p.add_argument("spec", help="protocol name or spec JSON path")
    p.add_argument("--party", required=True, choices=("alice", "bob"))
    p.add_argument("--target", required=True, help="honest outcome label to force")
    p.set_defaults(func=cmd_sdp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    start = time.time()
    try:
        results = args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except _USAGE_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except sdp.SolverError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        if exc.residuals:
            sys.stderr.write(f"residuals: {exc.residuals}\n")
        return EXIT_NUMERIC
    report = {
        "command": (argv if argv is not None else sys.argv[1:]),
        "seed": args.seed,
        "results": results,
    }
    if not args.no_meta:
        import cvxpy
        import scipy
        report["versions"] = {
            "otlab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "cvxpy": cvxpy.__version__,
        }
        report["wall_clock_s"] = time.time() - start
    _emit(report, args)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
