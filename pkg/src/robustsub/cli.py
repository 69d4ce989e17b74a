"""Command-line interface: ``python -m robustsub <command> ...``.

Exit codes: 0 success, 2 parameter errors, 3 size-limit refusals.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .continuous import robust_continuous_solve
from .errors import MatroidAxiomError, ParameterError, SizeLimitError
from .functions import (
    CoverageFunction,
    FacilityLocationFunction,
    LambdaFunction,
    ModularFunction,
    PerturbedFamilySpec,
    RobustInstance,
    check_submodular_monotone,
    load_ratings_csv,
)
from .harness import ExperimentConfig, run_experiment
from .matroids import (
    ExplicitMatroid,
    Intersection,
    KnapsackConstraint,
    PartitionMatroid,
    UniformMatroid,
    check_matroid_axioms,
)
from .multilinear import EstimatorConfig
from .offline import brute_force_opt, distributionally_robust_solve, robust_knapsack_solve, robust_offline_solve
from .online import drifting, normalized, online_softmin_run, stationary, switching

log = logging.getLogger("robustsub")


# ---------------------------------------------------------------- instance documents

def _objective(doc, n, base_dir: Path):
    kind = doc.get("type")
    if kind == "coverage":
        return CoverageFunction(doc["cover"], doc.get("weights"))
    if kind == "modular":
        return ModularFunction(doc["weights"], doc.get("offset", 0.0))
    if kind == "facility_location":
        if "ratings_csv" in doc:
            ratings, _ = load_ratings_csv(base_dir / doc["ratings_csv"])
        else:
            ratings = doc["ratings"]
        return FacilityLocationFunction(ratings, doc.get("r_max", 5.0))
    if kind == "table":
        vals = np.asarray(doc["values"], dtype=float)
        if n is None or vals.size != 1 << n:
            raise ParameterError("table objective needs 2^n values and a top-level n")
        return LambdaFunction(n, lambda S, v=vals: float(v[sum(1 << e for e in S)]), "table")
    raise ParameterError(f"unknown objective type {kind!r}")


def _constraint(doc, n):
    kind = doc.get("type")
    if kind == "partition":
        return PartitionMatroid(doc["parts"], doc["budgets"])
    if kind == "uniform":
        return UniformMatroid(n, int(doc["b"]))
    if kind == "explicit":
        return ExplicitMatroid(n, doc["sets"], close_downward=doc.get("close_downward", False))
    if kind == "knapsack":
        return KnapsackConstraint(doc["costs"], doc.get("capacity", 1.0))
    if kind == "intersection":
        return Intersection([_constraint(m, n) for m in doc["matroids"]])
    raise ParameterError(f"unknown constraint type {kind!r}")


def load_instance(path, epsilon=None):
    """Read an instance JSON document; see README for the format."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ParameterError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON ({exc})") from None
    try:
        n = doc.get("n")
        objectives = [_objective(o, n, path.parent) for o in doc["objectives"]]
        if "perturbed" in doc:
            if len(objectives) != 1:
                raise ParameterError("a perturbed family needs exactly one base objective")
            objectives = PerturbedFamilySpec.from_json(doc["perturbed"]).build(objectives[0])
        n = objectives[0].n
        constraint = _constraint(doc["constraint"], n)
    except KeyError as exc:
        raise ParameterError(f"{path}: missing field {exc}") from None
    eps = doc.get("epsilon", 0.1) if epsilon is None else epsilon
    return RobustInstance(objectives, constraint, eps, vertices=doc.get("vertices")), doc


# ---------------------------------------------------------------- output

def _emit(args, payload: dict, rows=None):
    if args.output == "json":
        print(json.dumps(payload, sort_keys=True, indent=2))
        return
    buf = io.StringIO()
    w = csv.writer(buf)
    if rows is None:
        w.writerow(["key", "value"])
        for k in sorted(payload):
            v = payload[k]
            w.writerow([k, json.dumps(v) if isinstance(v, (list, dict)) else v])
    else:
        for r in rows:
            w.writerow(r)
    sys.stdout.write(buf.getvalue())


def _workdir(args) -> Path:
    wd = Path(args.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    return wd


def _path(args, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else Path(args.workdir) / p


def _solution_payload(sol, inst):
    d = sol.to_dict()
    d["epsilon"] = inst.epsilon
    d["k"] = inst.k
    d["n"] = inst.n
    return d


# ---------------------------------------------------------------- commands

def cmd_solve(args):
    inst, _ = load_instance(_path(args, args.instance), args.epsilon)
    sol = robust_offline_solve(inst, search=args.search)
    _emit(args, _solution_payload(sol, inst))


def cmd_solve_intersection(args):
    inst, _ = load_instance(_path(args, args.instance), args.epsilon)
    if not isinstance(inst.constraint, Intersection):
        raise ParameterError("solve-intersection needs an 'intersection' constraint")
    sol = robust_offline_solve(inst, search=args.search)
    _emit(args, _solution_payload(sol, inst))


def cmd_solve_knapsack(args):
    inst, _ = load_instance(_path(args, args.instance), args.epsilon)
    if not isinstance(inst.constraint, KnapsackConstraint):
        raise ParameterError("solve-knapsack needs a 'knapsack' constraint")
    sol = robust_knapsack_solve(inst, search=args.search)
    _emit(args, _solution_payload(sol, inst))


def cmd_solve_dro(args):
    inst, _ = load_instance(_path(args, args.instance), args.epsilon)
    if not inst.vertices:
        raise ParameterError("solve-dro needs a 'vertices' list in the instance")
    sol = distributionally_robust_solve(inst.objectives, inst.vertices, inst.constraint, inst.epsilon,
                                        search=args.search)
    _emit(args, _solution_payload(sol, inst))


def cmd_solve_continuous(args):
    inst, _ = load_instance(_path(args, args.instance), args.epsilon)
    cfg = EstimatorConfig(args.samples, args.seed)
    exact = None if not args.monte_carlo else False
    sol = robust_continuous_solve(inst, delta=args.delta, repetitions=args.repetitions, seed=args.seed,
                                  exact=exact, cfg=cfg)
    _emit(args, _solution_payload(sol, inst))


def cmd_oracle(args):
    inst, _ = load_instance(_path(args, args.instance))
    c = inst.constraint
    if isinstance(c, list):
        c = Intersection(c)
    opt, S = brute_force_opt(inst.objectives, c)
    _emit(args, {"opt": opt, "argmax": sorted(S), "k": inst.k, "n": inst.n})


def cmd_validate(args):
    path = _path(args, args.instance)
    try:
        doc = json.loads(path.read_text())
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        raise ParameterError(f"{path}: {exc}") from None
    cdoc = doc.get("constraint", {})
    report = {"constraint": cdoc.get("type"), "matroid": None, "objectives": []}
    if cdoc.get("type") == "explicit":
        n = doc.get("n")
        if n is None:
            raise ParameterError("explicit constraint needs a top-level n")
        family = [frozenset(S) for S in cdoc["sets"]]
        if cdoc.get("close_downward"):
            family = list(ExplicitMatroid(n, family, close_downward=True, validate=False).family)
        check_matroid_axioms(family, n)
        report["matroid"] = "ok"
    inst, _ = load_instance(path)
    for i, f in enumerate(inst.objectives):
        rep = check_submodular_monotone(f)
        report["objectives"].append({"index": i, "submodular": rep.submodular, "monotone": rep.monotone,
                                     "counterexample": rep.counterexample})
        if not rep.ok:
            _emit(args, report)
            raise ParameterError(f"objective {i} is not monotone submodular: {rep.counterexample}")
    _emit(args, report)


def _online_schedule(args):
    T = args.T
    if args.instance:
        inst, doc = load_instance(_path(args, args.instance), args.epsilon)
        objs = normalized(inst.objectives)
        return stationary(objs, T), inst.constraint
    rng = np.random.default_rng(args.seed)
    n, k = args.n, args.k
    M = PartitionMatroid([list(range(0, n // 2)), list(range(n // 2, n))], 1)
    if args.adversary == "drifting":
        return drifting(n, k, T, args.seed, period=args.period), M
    first = normalized([CoverageFunction.random(n, 3 * n, 0.25, rng) for _ in range(k)])
    if args.adversary == "stationary":
        return stationary(first, T), M
    second = normalized([CoverageFunction.random(n, 3 * n, 0.25, rng) for _ in range(k)])
    return switching(first, second, T, [T // 2]), M


def cmd_online(args):
    schedule, M = _online_schedule(args)
    eps = 0.5 if args.epsilon is None else args.epsilon
    if args.literal_params and (schedule.n > 3 or schedule.T > 3):
        log.warning("literal parameters are only tractable for n, T <= 3")
    res = online_softmin_run(schedule, M, eps, eta=args.eta, seed=args.seed, literal_params=args.literal_params,
                             draws=args.draws, adaptive=args.adaptive,
                             cfg=EstimatorConfig(args.samples, args.seed))
    wd = _workdir(args)
    res.write_transcript(wd / "transcript.jsonl")
    (wd / "regret.json").write_text(res.report.to_json())
    res.report.write_csv(wd / "regret.csv")
    if args.plot:
        from .plotting import plot_regret

        plot_regret(res.report, wd / "regret.png")
    T = schedule.T
    payload = {
        "T": T, "n": schedule.n, "epsilon": eps, "ell": res.params.ell, "delta": res.params.delta,
        "alpha": res.params.alpha, "eta": res.params.eta, "final_regret": res.report.regret(T),
        "average_regret": res.report.regret(T) / T, "hindsight_value": res.report.hindsight_value,
        "measured_A": res.max_l1, "measured_L": res.max_dot, "workdir": str(wd),
    }
    _emit(args, payload)


def cmd_experiment(args):
    if args.config:
        p = _path(args, args.config)
        try:
            cfg = ExperimentConfig.from_json(p.read_text())
        except FileNotFoundError:
            raise ParameterError(f"{p}: no such file") from None
    else:
        over = {"seed": args.seed}
        if args.epsilon is not None:
            over["epsilon"] = args.epsilon
        if args.trials is not None:
            over["trials"] = args.trials
        cfg = ExperimentConfig(**over)
    ratings = None
    if args.ratings:
        ratings, _ = load_ratings_csv(_path(args, args.ratings))
    res = run_experiment(cfg, workers=args.workers, ratings=ratings)
    wd = _workdir(args)
    (wd / "experiment.json").write_text(res.to_json())
    with open(wd / "records.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "wall_time_s", "oracle_calls", "union_size", "min_objective_value", "gamma", "ell",
                    "per_part_sizes"])
        for r in res.records:
            w.writerow([r.trial, r.wall_time_s, r.oracle_calls, r.union_size, r.min_objective_value, r.gamma,
                        r.ell, " ".join(map(str, r.per_part_sizes))])
    if args.plot:
        from .plotting import plot_experiment, plot_part_sizes

        plot_experiment(res, wd / "experiment.png")
        plot_part_sizes(res, wd / "part_sizes.png")
    _emit(args, res.summary())


# ---------------------------------------------------------------- parser

def _common(suppress: bool):
    # Subcommands repeat the global flags with suppressed defaults so a flag
    # given before the command is not reset by the subparser.
    def d(v):
        return argparse.SUPPRESS if suppress else v

    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--seed", type=int, default=d(0))
    c.add_argument("--samples", type=int, default=d(None), help="Monte-Carlo samples per estimate")
    c.add_argument("--epsilon", type=float, default=d(None))
    c.add_argument("--output", choices=["json", "csv"], default=d("json"))
    c.add_argument("--paper-params", dest="literal_params", action="store_true", default=d(False),
                   help="literal online parameters (tiny runs only)")
    c.add_argument("--workdir", default=d("."), help="base directory for outputs and relative inputs")
    c.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return c


def build_parser():
    common = _common(True)
    p = argparse.ArgumentParser(prog="robustsub", description="Robust submodular maximization",
                                parents=[_common(False)])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, instance=True, search=False):
        sp = sub.add_parser(name, help=help_, parents=[common])
        if instance:
            sp.add_argument("instance")
        if search:
            sp.add_argument("--search", choices=["descending", "binary"], default="descending")
        sp.set_defaults(func=fn)
        return sp

    add("solve", cmd_solve, "bi-criteria greedy over a matroid", search=True)
    add("solve-intersection", cmd_solve_intersection, "greedy over an intersection of matroids", search=True)
    add("solve-knapsack", cmd_solve_knapsack, "bang-per-buck greedy under a knapsack", search=True)
    add("solve-dro", cmd_solve_dro, "distributionally robust variant", search=True)
    sp = add("solve-continuous", cmd_solve_continuous, "continuous greedy with swap rounding")
    sp.add_argument("--delta", type=float, default=0.01)
    sp.add_argument("--repetitions", type=int, default=20)
    sp.add_argument("--monte-carlo", action="store_true", help="force sampled gradients")
    add("oracle", cmd_oracle, "exhaustive max-min optimum")
    add("validate", cmd_validate, "check matroid axioms and monotone submodularity")

    sp = add("online", cmd_online, "soft-min online ascent against an adversary", instance=False)
    sp.add_argument("--instance", default=None, help="instance JSON played as a stationary schedule")
    sp.add_argument("--adversary", choices=["stationary", "drifting", "switching"], default="stationary")
    sp.add_argument("--T", type=int, default=200)
    sp.add_argument("--n", type=int, default=8)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--period", type=int, default=50)
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--draws", type=int, default=32)
    sp.add_argument("--adaptive", action="store_true", help="fresh perturbation every round")
    sp.add_argument("--plot", action="store_true")

    sp = add("experiment", cmd_experiment, "partition-constrained recommendation experiment", instance=False)
    sp.add_argument("--config", default=None, help="JSON file mirroring ExperimentConfig")
    sp.add_argument("--ratings", default=None, help="ratings CSV instead of synthetic data")
    sp.add_argument("--trials", type=int, default=None)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--plot", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except MatroidAxiomError as exc:
        print(json.dumps({"error": str(exc), "counterexample": exc.counterexample}, sort_keys=True), file=sys.stderr)
        return 2
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SizeLimitError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
