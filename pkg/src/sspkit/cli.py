"""Command-line front end: ``sspkit <command> ...``.

Exit codes: 0 ok, 1 validation failure, 2 non-convergence,
3 bad parameters or infeasible request, 4 internal contract violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, bellman, fixtures, io, perturbation, properness
from .errors import ParameterError, SspError
from .model import validate

OK, INVALID, NONCONVERGED, BAD_PARAMS, CONTRACT = 0, 1, 2, 3, 4


@dataclass
class CommandResult:
    exit_code: int
    artifacts: list[str] = field(default_factory=list)
    summary: str = ""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ParameterError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _emit(args, text: str, result: CommandResult, path=None) -> None:
    path = path or args.out
    if path:
        Path(path).write_text(text, encoding="utf-8")
        result.artifacts.append(str(path))
    else:
        sys.stdout.write(text)


def _is_csv(path) -> bool:
    return path is not None and str(path).endswith(".csv")


def _fmt(model, J) -> str:
    return " ".join(f"{s}={v:g}" for s, v in zip(model.states, J))


# -- commands ---------------------------------------------------------------


def cmd_validate(args, res: CommandResult) -> None:
    doc = json.loads(Path(args.model).read_text(encoding="utf-8"))
    try:
        model = io.model_from_dict(doc)
        problems = []
    except SspError as exc:
        problems = getattr(exc, "violations", [str(exc)])
        model = None
    if model is not None:
        problems = validate(model)
    _emit(args, io.dump({"valid": not problems, "violations": [str(p) for p in problems]}), res)
    res.exit_code = INVALID if problems else OK
    res.summary = "valid" if not problems else f"{len(problems)} violation(s): {problems[0]}"


def _initial(model, init: str, opts) -> np.ndarray:
    if init == "zero":
        return model.zeros()
    if init.startswith("perturbed:"):
        delta = float(init.split(":", 1)[1])
        return perturbation.solve_perturbed(model, delta, opts)
    if init.startswith("file:"):
        return io.read_values(model, init.split(":", 1)[1])
    raise ParameterError(f"bad --init {init!r}; use zero, perturbed:<delta> or file:<path>")


def cmd_solve(args, res):
    model = io.read_model(args.model)
    opts = bellman.ViOptions(tol_abs=args.tol, max_sweeps=args.max_sweeps)
    J0 = _initial(model, args.init, opts)
    J, trace = bellman.value_iteration(model, J0, opts)
    _emit(args, io.dump(io.values_to_dict(model, J)), res)
    if args.trace:
        _emit(args, trace.to_csv(), res, args.trace)
    res.summary = f"converged in {trace.sweeps} sweeps: {_fmt(model, J)}"


def cmd_evaluate(args, res):
    model = io.read_model(args.model)
    mu = io.read_policy(model, args.policy)
    if not isinstance(mu, properness.StationaryPolicy):
        raise ParameterError("evaluate needs a stationary policy")
    J = bellman.evaluate_policy(model, mu)
    _emit(args, io.dump(io.values_to_dict(model, J)), res)
    res.summary = _fmt(model, J)


def cmd_classify(args, res):
    model = io.read_model(args.model)
    mu = io.read_policy(model, args.policy)
    if not isinstance(mu, properness.StationaryPolicy):
        raise ParameterError("classify needs a stationary policy")
    rep = properness.classify(model, mu)
    _emit(args, io.dump(rep.to_dict(model)), res)
    res.summary = "proper at: " + ",".join(model.states[x] for x in sorted(rep.proper_states))


def cmd_sweep(args, res):
    model = io.read_model(args.model)
    sweep = perturbation.delta_sweep(model, _floats(args.deltas))
    text = sweep.to_csv() if _is_csv(args.out) else io.dump(sweep.to_dict())
    _emit(args, text, res)
    if not sweep.monotone.all():
        raise perturbation.ContractViolation("perturbed optimum not monotone in delta")
    res.summary = "limit: " + _fmt(model, sweep.limit)


def cmd_verify(args, res):
    model = io.read_model(args.model)
    J = io.read_values(model, args.values)
    domain = None
    if args.domain == "interior":
        if model.interior is None:
            raise ParameterError("model file has no interior (not a truncation)")
        domain = model.interior
    rep = analysis.verify_fixed_point(model, J, args.tol, domain)
    _emit(args, io.dump(rep.to_dict()), res)
    res.exit_code = OK if rep.passed else INVALID
    res.summary = f"{'pass' if rep.passed else 'fail'}: residual {rep.residual:g} at {rep.worst_state}"


def cmd_gap(args, res):
    model = io.read_model(args.model)
    rep = analysis.gap_report(model)
    _emit(args, io.dump(rep.to_dict()), res)
    if not (rep.j_star_check.passed and rep.j_hat_check.passed):
        res.exit_code = CONTRACT
    res.summary = rep.summary()


def cmd_lump(args, res):
    model = io.read_model(args.model)
    j_star, _ = bellman.value_iteration(model, model.zeros())
    lumped = analysis.lump(model, j_star)
    _emit(args, io.dump(io.model_to_dict(lumped)), res)
    merged = sorted(set(model.states) - set(lumped.states))
    res.summary = f"merged into {model.states[0]}: {','.join(merged) or 'nothing'}"


def cmd_homotopy(args, res):
    model = io.read_model(args.model)
    sweep = analysis.discount_homotopy(model, _floats(args.alphas))
    text = sweep.to_csv() if _is_csv(args.out) else io.dump(sweep.to_dict())
    _emit(args, text, res)
    res.summary = f"alpha={sweep.schedule[-1]!r}: " + _fmt(model, sweep.limit)


def cmd_rollout(args, res):
    model = io.read_model(args.model)
    pi = io.read_policy(model, args.policy)
    J = io.read_values(model, args.values) if args.values else None
    est = properness.rollout(model, pi, model.index(args.start), args.horizon, args.runs, args.seed, J)
    _emit(args, io.dump(est.to_dict()), res)
    res.summary = f"cost {est.cost:g} ± {est.cost_se:g} over {est.n_runs} runs"


def cmd_fixture(args, res):
    name = args.name
    cert = None
    if name == "cycle":
        model, cert = fixtures.cycle_fixture()
    elif name == "countdown":
        model, cert = fixtures.countdown_chain(args.n)
    elif name == "stopping":
        model, cert = fixtures.stopping_grid(args.m)
    elif name == "zero_hop":
        model, cert = fixtures.zero_hop_chain()
    elif name == "example1":
        model, _, cert = fixtures.example1_chain(args.alpha, args.x0, args.depth)
    elif name == "random":
        model = fixtures.random_ssp(args.seed, args.n_states, args.max_controls, args.max_branches)
    else:
        raise ParameterError(f"unknown fixture {name!r}")
    _emit(args, io.dump(io.model_to_dict(model)), res)
    if args.cert and cert is not None:
        doc = {"j_star": cert.j_star, "j_hat": cert.j_hat, "proper": cert.proper, "note": cert.note}
        _emit(args, io.dump(doc), res, args.cert)
    res.summary = f"{model.name}: {model.n_states} states"


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sspkit", description="Stochastic shortest path workbench")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        sp.add_argument("--out", help="artifact path (stdout if omitted)")
        return sp

    sp = add("validate", cmd_validate, "check a model file")
    sp.add_argument("model")

    sp = add("solve", cmd_solve, "value iteration")
    sp.add_argument("model")
    sp.add_argument("--init", default="zero", help="zero | perturbed:<delta> | file:<path>")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-sweeps", type=int, default=100_000)
    sp.add_argument("--trace", help="CSV path for the sweep trace")

    for name, fn in (("evaluate", cmd_evaluate), ("classify", cmd_classify)):
        sp = add(name, fn, f"{name} a stationary policy")
        sp.add_argument("model")
        sp.add_argument("--policy", required=True)

    sp = add("sweep", cmd_sweep, "perturbed optima along a delta schedule")
    sp.add_argument("model")
    sp.add_argument("--deltas", default=",".join(map(repr, perturbation.DEFAULT_SCHEDULE)))

    sp = add("verify", cmd_verify, "check that a value function solves Bellman's equation")
    sp.add_argument("model")
    sp.add_argument("--values", required=True)
    sp.add_argument("--domain", choices=("all", "interior"), default="all")
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = add("gap", cmd_gap, "J* versus the proper-policy optimum")
    sp.add_argument("model")

    sp = add("lump", cmd_lump, "merge zero-cost states into t")
    sp.add_argument("model")

    sp = add("homotopy", cmd_homotopy, "discounted optima for increasing discount factors")
    sp.add_argument("model")
    sp.add_argument("--alphas", required=True)

    sp = add("rollout", cmd_rollout, "Monte Carlo estimates under a policy")
    sp.add_argument("model")
    sp.add_argument("--policy", required=True)
    sp.add_argument("--start", required=True)
    sp.add_argument("--runs", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--horizon", type=int, default=100)
    sp.add_argument("--values", help="value file whose expectation E{J(x_k)} is tracked")

    sp = add("fixture", cmd_fixture, "write a built-in instance as a model file")
    sp.add_argument("name", choices=("cycle", "countdown", "stopping", "zero_hop", "example1", "random"))
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--m", type=int, default=10)
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--x0", type=float, default=1.0)
    sp.add_argument("--depth", type=int, default=30)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-states", type=int, default=5)
    sp.add_argument("--max-controls", type=int, default=2)
    sp.add_argument("--max-branches", type=int, default=3)
    sp.add_argument("--cert", help="also write the fixture certificate here")
    return p


def run(argv=None) -> CommandResult:
    res = CommandResult(OK)
    try:
        args = build_parser().parse_args(argv)
        args.fn(args, res)
    except SspError as exc:
        res.exit_code = exc.exit_code
        res.summary = f"error: {exc}"
    except (OSError, json.JSONDecodeError) as exc:
        res.exit_code = BAD_PARAMS
        res.summary = f"error: {exc}"
    return res


def main(argv=None) -> None:
    res = run(argv)
    print(res.summary, file=sys.stderr if res.exit_code else sys.stdout)
    sys.exit(res.exit_code)
