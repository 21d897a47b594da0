"""Command-line front end: ``steerfilter <scenario> [options]``.

Exit codes: 0 success, 2 solver failure, 3 invalid input.
"""

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from steerfilter import __version__
from steerfilter.filters import (
    FilterEnsemble, apply_all, ensemble_from_diagonals, ensemble_from_waveplates, simulate_preparation,
)
from steerfilter.hidden import SearchConfig, hidden_search, sweep_state_map, write_search_csv
from steerfilter.qcore import (
    StateError, StateParams, concurrence, decode_matrix, encode_matrix, family_state, fidelity,
    trace_distance, validate_state,
)
from steerfilter.scenarios import amplify, distill, find_filters, reverse
from steerfilter.steering import SolverConfig, SolverError, analytic_predicates, classify
from steerfilter import tomography as tomo

EXIT_OK, EXIT_SOLVER, EXIT_INPUT = 0, 2, 3
DEFAULT_FILTERS = (0.70, 0.20, 0.12, 0.16)

SCENARIOS = {
    "classify": "both steering radii and the configuration label",
    "filter-apply": "branch probabilities and states under a filter ensemble",
    "find-filters": "search an ensemble whose branches show all four configurations",
    "reverse": "search an ensemble with a branch steerable only from B to A",
    "distill": "search an ensemble with a branch more steerable both ways",
    "amplify": "per-branch radius changes under a given ensemble",
    "hidden-search": "random filters looking for hidden steering",
    "map": "state-space region table from the closed-form predicates (CSV)",
    "tomo-state": "simulated state tomography and reconstruction fidelity",
    "tomo-process": "simulated filter process tomography and Kraus fit",
    "prep-check": "two-path preparation compared with the target state",
}


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _common(p):
    g = p.add_argument_group("state")
    g.add_argument("--theta", type=float, help="mixing angle of the family state (radians)")
    g.add_argument("--eta", type=float, help="weight of the pure component of the family state")
    g.add_argument("--state", metavar="FILE",
                   help='JSON state: {"dims","re","im"} matrix or {"theta","eta"}')
    g = p.add_argument_group("filters")
    g.add_argument("--filters", metavar="A1,A2,B1,B2",
                   help='pass amplitudes, or a JSON file {"a1","a2","b1","b2"} / {"alpha_deg":[...]}')
    g.add_argument("--waveplates", metavar="D1,D2,D3,D4", help="half-waveplate angles H1..H4 in degrees")
    g = p.add_argument_group("run")
    g.add_argument("--samples", type=int, help="sample count (hidden-search, find-filters budget, counts per setting)")
    g.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    g.add_argument("--err", type=float, help="LHS mismatch accepted at the reported radius (default 1.2e-5)")
    g.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    g.add_argument("--full", action="store_true", help="emit per-sample CSV detail where supported")
    g.add_argument("--threads", type=int, default=1, help="worker cap for data-parallel stages")
    g.add_argument("--grid", type=int, default=41, help="grid points per axis for map (default 41)")
    g.add_argument("--noiseless", action="store_true", help="use exact count means in tomography")
    g.add_argument("--counts", metavar="FILE", help="read a counts CSV instead of simulating")


def build_parser():
    parser = _Parser(prog="steerfilter", description="Local filtering of two-qubit EPR steering.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="scenario", metavar="SCENARIO", parser_class=_Parser)
    sub.required = True
    for name, help_text in SCENARIOS.items():
        _common(sub.add_parser(name, help=help_text, description=help_text))
    return parser


def _load_json(path):
    if not os.path.exists(path):
        raise InputError(f"file not found: {path}")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def _params(args):
    if args.theta is None and args.eta is None:
        return None
    if args.theta is None or args.eta is None:
        raise InputError("--theta and --eta must be given together")
    return StateParams(args.theta, args.eta)


def _state(args, required=True):
    """Returns (rho, params or None)."""
    if args.state is not None:
        if args.theta is not None or args.eta is not None:
            raise InputError("give either --state or --theta/--eta, not both")
        obj = _load_json(args.state)
        if "dims" in obj:
            return validate_state(decode_matrix(obj), (4,)), None
        p = StateParams(float(obj["theta"]), float(obj["eta"]))
        return family_state(p), p
    p = _params(args)
    if p is None:
        if required:
            raise InputError("a state is required: --theta/--eta or --state")
        return None, None
    return family_state(p), p


def _ensemble(args, default=None):
    if args.filters is not None and args.waveplates is not None:
        raise InputError("give either --filters or --waveplates, not both")
    if args.waveplates is not None:
        deg = _floats(args.waveplates, 4, "--waveplates")
        return ensemble_from_waveplates(np.radians(deg))
    if args.filters is not None:
        if os.path.exists(args.filters) or args.filters.endswith(".json"):
            return FilterEnsemble.from_json(_load_json(args.filters))
        return ensemble_from_diagonals(*_floats(args.filters, 4, "--filters"))
    if default is None:
        raise InputError("a filter ensemble is required: --filters or --waveplates")
    return ensemble_from_diagonals(*default)


def _floats(text, n, flag):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"{flag} expects {n} comma-separated numbers") from None
    if len(vals) != n or not all(math.isfinite(v) for v in vals):
        raise InputError(f"{flag} expects {n} comma-separated numbers")
    return vals


def _solver(args, **over):
    kw = {"seed": args.seed}
    if args.err is not None:
        kw["err"] = args.err
    kw.update(over)
    return SolverConfig(**kw)


def _params_json(p):
    return None if p is None else {"theta": p.theta, "eta": p.eta}


def run_classify(args):
    rho, p = _state(args)
    rep = classify(rho, _solver(args)).to_json()
    out = {"scenario": "classify", "params": _params_json(p), **rep}
    if p is not None:
        out["analytic_predicates"] = analytic_predicates(p)
    return out


def run_filter_apply(args):
    rho, p = _state(args)
    ens = _ensemble(args)
    branches = []
    for o in apply_all(rho, ens):
        branches.append({
            "branch": list(o.branch),
            "probability": o.probability,
            "degenerate": o.degenerate,
            "state": None if o.degenerate else encode_matrix(o.state),
            "concurrence": None if o.degenerate else concurrence(o.state),
        })
    return {"scenario": "filter-apply", "params": _params_json(p), "ensemble": ens.to_json(),
            "completeness_residual": ens.completeness_residual(), "branches": branches}


def _design(fn, name):
    def run(args):
        rho, p = _state(args)
        n_random = args.samples if args.samples is not None else 2000
        res = fn(rho, _solver(args), n_random=n_random, seed=args.seed)
        return {"scenario": name, "params": _params_json(p), "search_budget": {"random": n_random, "refine": 200},
                **res.to_json()}
    return run


def run_amplify(args):
    rho, p = _state(args)
    ens = _ensemble(args, default=DEFAULT_FILTERS)
    return {"scenario": "amplify", "params": _params_json(p), **amplify(rho, ens, _solver(args))}


def run_hidden_search(args):
    rho, p = _state(args)
    n = args.samples if args.samples is not None else 1000
    cfg = SearchConfig(n_samples=n, rng_seed=args.seed, threads=args.threads,
                       solver=_solver(args, outer_seeds=8), verify_solver=_solver(args))
    rep = hidden_search(rho, cfg, p)
    if args.full:
        buf = io.StringIO()
        write_search_csv(rep, buf)
        return buf.getvalue()
    return {"scenario": "hidden-search", "n_samples": n, "seed": args.seed, **rep.summary()}


def run_map(args):
    n = args.grid
    if n < 1:
        raise InputError("--grid must be positive")
    p = _params(args)
    if p is not None:
        thetas, etas = [p.theta], [p.eta]
    else:
        thetas = np.linspace(0.0, math.pi / 4, n).tolist()
        etas = np.linspace(0.0, 1.0, n).tolist()
    rows = sweep_state_map(thetas, etas)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def run_tomo_state(args):
    rho, p = _state(args, required=args.counts is None)
    rng = np.random.default_rng(args.seed)
    n = args.samples if args.samples is not None else 10_000
    counts = tomo.CountsRecord.from_csv(args.counts) if args.counts else \
        tomo.simulate_counts(rho, n_per_setting=n, rng=rng, noiseless=args.noiseless)
    est = tomo.reconstruct_state(counts)
    out = {"scenario": "tomo-state", "params": _params_json(p), "n_per_setting": None if args.counts else n,
           "noiseless": args.noiseless, "estimate": encode_matrix(est)}
    if rho is not None:
        out["fidelity"] = fidelity(est, rho)
        out["trace_distance"] = trace_distance(est, rho)
    return out


def run_tomo_process(args):
    ens = _ensemble(args, default=DEFAULT_FILTERS)
    rng = np.random.default_rng(args.seed)
    n = args.samples if args.samples is not None else 10_000
    sides = {}
    for side in "AB":
        truth = tomo.chi_of_kraus(ens.side(side))
        counts = tomo.simulate_counts(ens, n_per_setting=n, rng=rng, noiseless=args.noiseless, side=side)
        chi = tomo.process_tomography(counts)
        fit = tomo.fit_kraus(chi, tomo.branch_fractions(counts), tomo.hv_transmission(counts, f"{side}1"))
        sides[side] = {
            "chi": encode_matrix(chi),
            "branch_fractions": list(tomo.branch_fractions(counts)),
            "kraus": fit.to_json(),
            "amplitudes": list(fit.amplitudes()),
            "process_fidelity_chi": tomo.process_fidelity(chi, truth),
            "process_fidelity_kraus": tomo.process_fidelity(tomo.chi_of_kraus(fit.kraus()), truth),
        }
    return {"scenario": "tomo-process", "ensemble": ens.to_json(), "n_per_setting": n,
            "noiseless": args.noiseless, "sides": sides}


def run_prep_check(args):
    rho, p = _state(args)
    if p is None:
        raise InputError("prep-check needs --theta/--eta")
    prepared = simulate_preparation(p)
    return {"scenario": "prep-check", "params": _params_json(p),
            "max_abs_deviation": float(np.max(np.abs(prepared - rho))),
            "fidelity": fidelity(prepared, rho)}


RUNNERS = {
    "classify": run_classify,
    "filter-apply": run_filter_apply,
    "find-filters": _design(find_filters, "find-filters"),
    "reverse": _design(reverse, "reverse"),
    "distill": _design(distill, "distill"),
    "amplify": run_amplify,
    "hidden-search": run_hidden_search,
    "map": run_map,
    "tomo-state": run_tomo_state,
    "tomo-process": run_tomo_process,
    "prep-check": run_prep_check,
}


def _emit(result, path):
    text = result if isinstance(result, str) else json.dumps(result, indent=2, ensure_ascii=False) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be positive")
    if args.samples is not None and args.samples < 1:
        parser.error("--samples must be positive")
    try:
        result = RUNNERS[args.scenario](args)
    except SolverError as exc:
        print(f"steerfilter: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InputError, StateError, ValueError, KeyError, OSError) as exc:
        print(f"steerfilter: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _emit(result, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
