"""Command-line driver: one subcommand per experiment.

Every run writes its resolved configuration at the top of each output
file.  Flags override values read from ``--config``.  Exit status is 0 on
success, 1 when a verification fails and 2 on usage or domain errors.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .calculus import FIELDS, field_by_name, verify_chain_rule, verify_substitution_rule
from .counterexamples import (
    DEFAULT_MARGIN,
    Oscillator1Certificate,
    Oscillator2Certificate,
    construct_oscillator1,
    construct_oscillator2,
    parseval_check,
    verify_oscillator1,
    verify_oscillator2,
)
from .errors import BudgetExceeded, ContractError, DomainError, FlowBlowUp, NumericError
from .integration import (
    DEFAULT_TOL,
    boundedness_quantile,
    dyadic_partition,
    strong_variation_estimate,
    sum_squared_increments,
    symmetric_integral,
    uniform_partition,
)
from .measure import (
    TWO_PI,
    CoefficientProfile,
    FourierSM,
    RademacherSequence,
    SampledPath,
    TruncationPolicy,
    holder_diagnostic,
    sample_path,
)
from .sde import DRIFTS, SIGMAS, check_inverse_pde, drift_by_name, sigma_by_name, solve_sde, verify_solution_identity

PROG = "smcalc"
OUT_ENV = "SMCALC_OUT"
V_PATHS = {"zero": 0.0, "t": 1.0, "half-t": 0.5}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _levels(text: str) -> list[int]:
    try:
        out = [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty level list")
    return out


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _add_sm(p):
    p.add_argument("--profile", default="[[1, 8]]", help="JSON list of [m, n] blocks, or a file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T1", type=float, default=TWO_PI, help="horizon of the measure")
    p.add_argument("--max-index", type=int, default=2**20, help="truncation of unbounded profiles")
    p.add_argument("--points", type=int, default=2**12 + 1, help="path grid size")


def _add_rule(p, field_default):
    _add_sm(p)
    p.add_argument("--field", default=field_default, choices=sorted(FIELDS))
    p.add_argument("--V", default="zero", choices=sorted(V_PATHS))
    p.add_argument("--T", type=float, default=None, help="integration horizon (default T1)")
    # consecutive levels keep the spread of the last three sums near the finest error
    p.add_argument("--levels", type=_levels, default=[10, 11, 12], help="partition sizes 2**l")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)


def _add_sde(p):
    _add_sm(p)
    p.add_argument("--sigma", default="linear-sigma", choices=SIGMAS)
    p.add_argument("--drift", default="zero-drift", choices=DRIFTS)
    p.add_argument("--c", type=float, default=1.0, help="constant of const-sigma")
    p.add_argument("--K", type=float, default=1.0, help="constant of bounded-drift")
    p.add_argument("--X0", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1e-3, help="flow step")
    p.add_argument("--T", type=float, default=None, help="solution horizon (default T1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with option values; flags win")
    parser.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    parser.add_argument("--no-timestamp", action="store_true", help="omit the run timestamp")
    parser.add_argument("--threads", type=int, default=1, help="worker cap")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample-path", help="sample mu_t on a uniform grid")
    _add_sm(p)
    p.add_argument("--holder-levels", type=int, default=0, help="also fit a Holder exponent")

    p = sub.add_parser("sym-integral", help="symmetric sums of f(mu, V) against g(mu, V)")
    _add_rule(p, "linear")
    p.add_argument("--g", default="identity-g", choices=sorted(FIELDS))

    p = sub.add_parser("chain-rule", help="check the chain rule on one path")
    _add_rule(p, "quadratic")
    p.add_argument("--step", type=float, default=1e-3, help="quadrature node gap")

    p = sub.add_parser("substitution-rule", help="check the substitution rule on one path")
    _add_rule(p, "linear")
    p.add_argument("--g", default="square-g", choices=sorted(FIELDS))

    p = sub.add_parser("nvar", help="strong n-variation estimates against eps")
    _add_sm(p)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--eps", type=_floats, default=[0.1, 0.05, 0.01])
    p.add_argument("--upto", type=float, default=6.0, help="upper end of the s-integral")

    p = sub.add_parser("sde-solve", help="solve dX = sigma(X) dmu + b(X, t) dt")
    _add_sde(p)

    p = sub.add_parser("sde-verify", help="solve, then check the solution identity")
    _add_sde(p)
    p.add_argument("--psi", default="linear", choices=sorted(FIELDS))
    p.add_argument("--levels", type=_levels, default=[8, 10, 12])
    p.add_argument("--tol", type=float, default=1e-2)
    p.add_argument("--pde-samples", type=int, default=200)

    p = sub.add_parser("parseval", help="partial Parseval sum against its limit")
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--M", type=int, default=10**6)

    p = sub.add_parser("counterexample1", help="oscillating quadratic-variation functional")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
    p.add_argument("--check", help="re-verify an existing certificate instead")

    p = sub.add_parser("counterexample2", help="oscillating dyadic square sums")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--first-seed", type=int, default=0)
    p.add_argument("--check", help="re-verify an existing certificate instead")

    p = sub.add_parser("quantile", help="quantile of a statistic over seeds")
    p.add_argument("--profile", default="[[1, 64]]")
    p.add_argument("--statistic", default="squared-increments", choices=["squared-increments", "nvar"])
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--first-seed", type=int, default=0)
    p.add_argument("--q", type=float, default=0.99)
    p.add_argument("--levels", type=_levels, default=[6, 8, 10], help="dyadic levels (squared-increments)")
    p.add_argument("--n", type=int, default=3, help="power (nvar)")
    p.add_argument("--eps", type=_floats, default=[0.1, 0.05, 0.01], help="lags (nvar)")
    p.add_argument("--points", type=int, default=2**14 + 1, help="path grid size (nvar)")
    p.add_argument("--upto", type=float, default=6.0, help="upper end of the s-integral (nvar)")
    return parser


def _json_text(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_text(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_text(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        text = f"{x:.17g}"
        return text if any(c in text for c in ".e") else text + ".0"
    return json.dumps(obj)


class Run:
    """Resolved options plus the output directory."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        out = args.out or os.environ.get(OUT_ENV) or "."
        self.out = Path(out)
        if not self.out.is_dir():
            raise DomainError(f"output directory {out} does not exist")
        self.config = {
            k: v for k, v in sorted(vars(args).items()) if k not in ("out", "no_timestamp", "config")
        }
        self.header = {"command": args.command, "config": self.config}
        if not args.no_timestamp:
            self.header["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        self.written = []

    def path(self, name: str) -> Path:
        p = self.out / f"{self.args.command}-{name}"
        self.written.append(str(p))
        return p

    def write_json(self, name: str, payload: dict) -> None:
        self.path(name).write_text(_json_text({**self.header, **payload}) + "\n")

    def write_csv(self, name: str, columns: str, rows) -> None:
        rows = np.asarray(rows, dtype=float).reshape(-1, 2)
        with open(self.path(name), "w") as fh:
            fh.write("# " + _json_text(self.header) + "\n")
            np.savetxt(fh, rows, delimiter=",", header=columns, comments="", fmt="%.17g")


def _profile(text: str) -> CoefficientProfile:
    if os.path.isfile(text):
        text = Path(text).read_text()
    try:
        return CoefficientProfile.from_json(text)
    except DomainError:
        raise
    except (ValueError, TypeError) as exc:
        raise DomainError(f"malformed profile JSON: {exc}") from None


def _sm(a, seed=None, T1=None) -> FourierSM:
    return FourierSM(
        _profile(a.profile),
        RademacherSequence(a.seed if seed is None else seed),
        TruncationPolicy(a.max_index),
        a.T1 if T1 is None else T1,
    )


def _mu(a) -> SampledPath:
    if a.points < 3:
        raise DomainError("--points must be at least 3")
    return sample_path(_sm(a), a.points)


def _v_path(a, mu: SampledPath) -> SampledPath:
    return mu.with_values(V_PATHS[a.V] * mu.times)


def _refinement(a, T: float):
    return [uniform_partition(T, 2**l) for l in a.levels]


def _report_rows(report):
    return [[m, v] for m, v in report.estimates]


def cmd_sample_path(run: Run) -> int:
    a = run.args
    sm = _sm(a)
    mu = sample_path(sm, a.points)
    run.write_csv("path.csv", "t,value", np.column_stack([mu.times, mu.values]))
    payload = {
        "points": len(mu),
        "max_abs": float(np.abs(mu.values).max()),
        "path_tail_bound": sm.path_tail_bound(),
    }
    if a.holder_levels:
        fit = holder_diagnostic(mu, a.holder_levels)
        payload["holder_gamma"] = fit.gamma_hat
    run.write_json("summary.json", payload)
    return 0


def _horizon(a) -> float:
    T = a.T1 if a.T is None else a.T
    if not 0 < T <= a.T1:
        raise DomainError(f"horizon {T} must lie in (0, T1]")
    return T


def cmd_sym_integral(run: Run) -> int:
    a = run.args
    mu = _mu(a)
    V = _v_path(a, mu)
    f, g = field_by_name(a.field), field_by_name(a.g)
    v = V.values
    xi = mu.with_values(f(mu.values, v))
    eta = mu.with_values(g(mu.values, v))
    report = symmetric_integral(xi, eta, _refinement(a, _horizon(a)), a.tol)
    run.write_json("report.json", {"report": report.to_dict()})
    run.write_csv("table.csv", "mesh,sum", _report_rows(report))
    return 0


def _rule(run: Run, check) -> int:
    run.write_json("report.json", {"check": check.to_dict()})
    run.write_csv("residuals.csv", "mesh,residual", check.to_dict()["residuals"])
    return 0 if check.success else 1


def cmd_chain_rule(run: Run) -> int:
    a = run.args
    mu = _mu(a)
    check = verify_chain_rule(
        field_by_name(a.field), mu, _v_path(a, mu), _refinement(a, _horizon(a)), a.tol, a.step
    )
    return _rule(run, check)


def cmd_substitution_rule(run: Run) -> int:
    a = run.args
    mu = _mu(a)
    check = verify_substitution_rule(
        field_by_name(a.field), field_by_name(a.g), mu, _v_path(a, mu), _refinement(a, _horizon(a)), a.tol
    )
    return _rule(run, check)


def cmd_nvar(run: Run) -> int:
    a = run.args
    mu = _mu(a)
    rows = [[e, strong_variation_estimate(mu, a.n, e, a.upto)] for e in a.eps]
    run.write_csv("table.csv", "eps,value", rows)
    run.write_json("summary.json", {"estimates": rows})
    return 0


def _solve(a):
    mu = _mu(a)
    T = _horizon(a)
    if T < mu.t_end:
        k = int(round(T / mu.dt))
        mu = SampledPath(0.0, mu.dt, mu.values[: k + 1])
    sigma = sigma_by_name(a.sigma, a.c)
    b = drift_by_name(a.drift, a.K)
    return mu, sigma, b, solve_sde(sigma, b, a.X0, mu, a.h)


def _write_paths(run: Run, sol) -> None:
    run.write_csv("X.csv", "t,value", np.column_stack([sol.X.times, sol.X.values]))
    run.write_csv("Y.csv", "t,value", np.column_stack([sol.Y.times, sol.Y.values]))


def cmd_sde_solve(run: Run) -> int:
    mu, _, _, sol = _solve(run.args)
    _write_paths(run, sol)
    run.write_json("summary.json", {"diagnostics": sol.diagnostics, "X_T": float(sol.X.values[-1])})
    return 0


def cmd_sde_verify(run: Run) -> int:
    a = run.args
    mu, sigma, b, sol = _solve(a)
    psi = field_by_name(a.psi)
    rows = [
        [p.mesh, verify_solution_identity(sol, sigma, b, mu, psi, p)]
        for p in _refinement(a, mu.t_end)
    ]
    pde = check_inverse_pde(sol.flow, a.pde_samples, seed=a.seed)
    finest = rows[-1][1]
    ok = finest < a.tol
    _write_paths(run, sol)
    run.write_csv("residuals.csv", "mesh,residual", rows)
    run.write_json(
        "report.json",
        {"residuals": rows, "inverse_pde_residual": pde, "diagnostics": sol.diagnostics, "success": ok},
    )
    return 0 if ok else 1


def cmd_parseval(run: Run) -> int:
    a = run.args
    res = parseval_check(a.eps, a.M)
    run.write_json(
        "report.json",
        {
            "partial_sum": res.partial_sum,
            "tail_bound": res.tail_bound,
            "target": res.target,
            "gap": abs(res.partial_sum - res.target),
            "holds": res.holds,
        },
    )
    return 0 if res.holds else 1


def _load_certificate(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read certificate {path}: {exc}") from None


def _certificate(run: Run, cert, problems, partial_reason=None) -> int:
    payload = {"certificate": cert.to_dict(), "problems": problems, "verified": not problems}
    if partial_reason:
        payload["budget_exceeded"] = partial_reason
    run.write_json("certificate.json", payload)
    return 0 if not problems and not partial_reason else 1


def _cert_dict(d: dict) -> dict:
    return d.get("certificate", d)


def cmd_counterexample1(run: Run) -> int:
    a = run.args
    if a.check:
        cert = Oscillator1Certificate.from_dict(_cert_dict(_load_certificate(a.check)))
        return _certificate(run, cert, verify_oscillator1(cert))
    try:
        cert = construct_oscillator1(a.depth, a.margin)
    except BudgetExceeded as exc:
        return _certificate(run, exc.partial, verify_oscillator1(exc.partial), str(exc))
    return _certificate(run, cert, verify_oscillator1(cert))


def cmd_counterexample2(run: Run) -> int:
    a = run.args
    if a.check:
        cert = Oscillator2Certificate.from_dict(_cert_dict(_load_certificate(a.check)))
        return _certificate(run, cert, verify_oscillator2(cert))
    try:
        cert = construct_oscillator2(a.depth, a.seeds, first_seed=a.first_seed)
    except BudgetExceeded as exc:
        return _certificate(run, exc.partial, verify_oscillator2(exc.partial), str(exc))
    return _certificate(run, cert, verify_oscillator2(cert))


def cmd_quantile(run: Run) -> int:
    a = run.args
    profile = _profile(a.profile)
    rows = []
    if a.statistic == "squared-increments":
        for level in a.levels:
            p = dyadic_partition(TWO_PI, level)

            def stat(seed, p=p):
                return sum_squared_increments(FourierSM(profile, RademacherSequence(seed)), p)

            rows.append([level, boundedness_quantile(stat, a.seeds, a.q, a.first_seed, a.threads)])
        columns = "level,quantile"
    else:
        for e in a.eps:

            def stat(seed, e=e):
                mu = sample_path(FourierSM(profile, RademacherSequence(seed)), a.points)
                return strong_variation_estimate(mu, a.n, e, a.upto)

            rows.append([e, boundedness_quantile(stat, a.seeds, a.q, a.first_seed, a.threads)])
        columns = "eps,quantile"
    run.write_csv("table.csv", columns, rows)
    run.write_json("summary.json", {"quantiles": rows})
    return 0


COMMANDS = {
    "sample-path": cmd_sample_path,
    "sym-integral": cmd_sym_integral,
    "chain-rule": cmd_chain_rule,
    "substitution-rule": cmd_substitution_rule,
    "nvar": cmd_nvar,
    "sde-solve": cmd_sde_solve,
    "sde-verify": cmd_sde_verify,
    "parseval": cmd_parseval,
    "counterexample1": cmd_counterexample1,
    "counterexample2": cmd_counterexample2,
    "quantile": cmd_quantile,
}


def _subparser(parser, name):
    action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return action.choices[name]


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        config = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(config, dict):
        raise DomainError("config must be a JSON object")
    config = {k.replace("-", "_"): v for k, v in config.items()}
    config.pop("command", None)
    sub = _subparser(parser, args.command)
    known = {a.dest: a for a in sub._actions} | {a.dest: a for a in parser._actions}
    unknown = sorted(set(config) - set(known))
    if unknown:
        raise DomainError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    for key, value in config.items():
        action = known[key]
        if action.type is not None and isinstance(value, (str, int, float)):
            value = action.type(str(value) if action.type in (_levels, _floats) else value)
        if action.choices is not None and value not in action.choices:
            raise DomainError(f"{key} must be one of {', '.join(map(str, action.choices))}")
        (sub if key in {a.dest for a in sub._actions} else parser).set_defaults(**{key: value})
    # flags given on the command line still win
    return parser.parse_args(argv)


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
        return COMMANDS[args.command](Run(args))
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, DomainError, ContractError, argparse.ArgumentTypeError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, FlowBlowUp, MemoryError) as exc:
        print(f"{PROG}: failed: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
