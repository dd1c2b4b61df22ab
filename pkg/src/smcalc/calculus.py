"""Chain and substitution rules for symmetric integrals of f(mu_t, V_t).

Fields are functions of two reals (x, v) with x the driving path mu_t and v
a continuous bounded-variation path V_t.  All callables must accept numpy
arrays and be reentrant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DomainError, NumericError
from .integration import (
    DEFAULT_TOL,
    ConvergenceReport,
    Partition,
    _midpoint_sum,
    _on_partition,
    check_refinement,
    stieltjes_integral,
    symmetric_integral,
    symmetric_sum,
)
from .measure import SampledPath

DEFAULT_STEP = 1e-3

Fn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ScalarField2:
    value: Fn
    d_dx: Fn
    d_dv: Fn | None = None
    d2_dxx: Fn | None = None
    name: str = ""

    def __call__(self, x, v):
        x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
        return np.broadcast_to(self.value(x, v), x.shape).astype(float)

    def _eval(self, fn, x, v):
        x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
        return np.broadcast_to(fn(x, v), x.shape).astype(float)

    def dx(self, x, v):
        return self._eval(self.d_dx, x, v)

    def dv(self, x, v):
        if self.d_dv is None:
            raise ContractError(f"field {self.name or self.value!r} has no d_dv")
        return self._eval(self.d_dv, x, v)

    def dxx(self, x, v):
        if self.d2_dxx is None:
            raise ContractError(f"field {self.name or self.value!r} has no d2_dxx")
        return self._eval(self.d2_dxx, x, v)


def validate_field(
    f: ScalarField2,
    box: tuple[float, float, float, float],
    n: int = 7,
    rtol: float = 1e-4,
    h: float = 1e-5,
) -> float:
    """Compare supplied derivatives with central differences on a grid.

    ``box`` is (x_lo, x_hi, v_lo, v_hi).  Returns the worst relative error
    and raises :class:`ContractError` if it exceeds ``rtol``.
    """
    x, v = np.meshgrid(np.linspace(box[0], box[1], n), np.linspace(box[2], box[3], n))
    checks = [(f.dx(x, v), (f(x + h, v) - f(x - h, v)) / (2 * h))]
    if f.d_dv is not None:
        checks.append((f.dv(x, v), (f(x, v + h) - f(x, v - h)) / (2 * h)))
    if f.d2_dxx is not None:
        checks.append((f.dxx(x, v), (f.dx(x + h, v) - f.dx(x - h, v)) / (2 * h)))
    worst = 0.0
    for given, numeric in checks:
        scale = np.maximum(1.0, np.abs(numeric))
        worst = max(worst, float(np.max(np.abs(given - numeric) / scale)))
    if worst > rtol:
        raise ContractError(
            f"derivatives of {f.name or 'field'} disagree with finite differences"
            f" (relative error {worst:.2e})"
        )
    return worst


def _simpson_from_zero(g: Fn, x, v, step: float) -> np.ndarray:
    """integral_0^x g(y, v) dy elementwise, composite Simpson, node gap <= step."""
    x, v = np.broadcast_arrays(np.asarray(x, float), np.asarray(v, float))
    flat_x, flat_v = x.ravel(), v.ravel()
    out = np.zeros(flat_x.size)
    if flat_x.size == 0:
        return out.reshape(x.shape)
    reach = float(np.max(np.abs(flat_x)))
    m = max(2, int(np.ceil(reach / step)))
    m += m % 2
    s = np.linspace(0.0, 1.0, m + 1)
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w /= 3.0 * m
    rows = max(1, 2**21 // (m + 1))
    for lo in range(0, flat_x.size, rows):
        xs = flat_x[lo : lo + rows, None]
        vs = flat_v[lo : lo + rows, None]
        vals = np.broadcast_to(g(xs * s, vs), (xs.shape[0], m + 1))
        if not np.all(np.isfinite(vals)):
            raise NumericError("non-finite integrand value")
        out[lo : lo + rows] = flat_x[lo : lo + rows] * (vals @ w)
    return out.reshape(x.shape)


def antiderivative_eval(f: ScalarField2, x, v, step: float = DEFAULT_STEP):
    """F(x, v) = integral_0^x f(y, v) dy."""
    if not step > 0:
        raise DomainError("step must be positive")
    res = _simpson_from_zero(lambda y, w: f(y, w), x, v, step)
    return float(res) if res.ndim == 0 else res


@dataclass(frozen=True)
class Antiderivative:
    """F(x, v) = integral_0^x f(y, v) dy and its v-derivative, by quadrature."""

    field: ScalarField2
    step: float = DEFAULT_STEP

    def __call__(self, x, v):
        return _simpson_from_zero(lambda y, w: self.field(y, w), x, v, self.step)

    def d_dv(self, x, v):
        # differentiation under the integral sign
        return _simpson_from_zero(lambda y, w: self.field.dv(y, w), x, v, self.step)


def compose(f: ScalarField2, mu: SampledPath, V: SampledPath) -> SampledPath:
    """The path t -> f(mu_t, V_t) on mu's grid."""
    return mu.with_values(f(mu.values, V(mu.times)))


def chain_rule_rhs(
    f: ScalarField2,
    mu: SampledPath,
    V: SampledPath,
    p: Partition,
    step: float = DEFAULT_STEP,
) -> float:
    """F(mu_T, V_T) - F(mu_0, V_0) - integral F_v(mu_t, V_t) dV_t."""
    if f.d_dv is None:
        raise ContractError("the chain rule needs d_dv of the integrand")
    F = Antiderivative(f, step)
    m = _on_partition(mu, p)
    v = _on_partition(V, p)
    ends = F(m[[0, -1]], v[[0, -1]])
    correction = _midpoint_sum(F.d_dv(m, v), v)
    return float(ends[1] - ends[0] - correction)


@dataclass
class RuleCheck:
    """Left side report, right side value, and their gap at every mesh."""

    lhs_report: ConvergenceReport
    rhs: float
    residual: float
    residuals: list
    tol: float

    @property
    def success(self) -> bool:
        return self.residual < self.tol and self.lhs_report.converged

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs_report.to_dict(),
            "rhs": self.rhs,
            "residual": self.residual,
            "residuals": [[float(m), float(r)] for m, r in self.residuals],
            "tol": self.tol,
            "success": self.success,
        }


def _rule_check(report: ConvergenceReport, rhs: float, tol: float) -> RuleCheck:
    residuals = [(mesh, abs(val - rhs)) for mesh, val in report.estimates]
    return RuleCheck(report, rhs, abs(report.extrapolated_value - rhs), residuals, tol)


def verify_chain_rule(
    f: ScalarField2,
    mu: SampledPath,
    V: SampledPath,
    refinement: Sequence[Partition],
    tol: float = DEFAULT_TOL,
    step: float = DEFAULT_STEP,
) -> RuleCheck:
    """Symmetric integral of f(mu, V) against mu versus the chain-rule side.

    The right side is evaluated once, on the finest partition.
    """
    check_refinement(refinement)
    report = symmetric_integral(compose(f, mu, V), mu, refinement, tol)
    rhs = chain_rule_rhs(f, mu, V, refinement[-1], step)
    return _rule_check(report, rhs, tol)


def substitution_rhs(
    f: ScalarField2, g: ScalarField2, mu: SampledPath, V: SampledPath, p: Partition
) -> float:
    """int f g_x(mu, V) o dmu + int f g_v(mu, V) dV on one partition."""
    t = mu.times
    v = V(t)
    fv = f(mu.values, v)
    along_mu = mu.with_values(fv * g.dx(mu.values, v))
    along_v = mu.with_values(fv * g.dv(mu.values, v))
    return symmetric_sum(along_mu, mu, p) + stieltjes_integral(along_v, V, p)


def verify_substitution_rule(
    f: ScalarField2,
    g: ScalarField2,
    mu: SampledPath,
    V: SampledPath,
    refinement: Sequence[Partition],
    tol: float = DEFAULT_TOL,
) -> RuleCheck:
    """Symmetric integral of f(mu, V) against g(mu, V) versus its expansion."""
    if g.d2_dxx is None:
        raise ContractError("substitution needs g with a second x-derivative")
    check_refinement(refinement)
    report = symmetric_integral(compose(f, mu, V), compose(g, mu, V), refinement, tol)
    rhs = substitution_rhs(f, g, mu, V, refinement[-1])
    return _rule_check(report, rhs, tol)


def _const(c):
    return lambda x, v: np.full(np.broadcast(x, v).shape, float(c))


FIELDS = {
    "one": ScalarField2(_const(1.0), _const(0.0), _const(0.0), _const(0.0), "one"),
    "linear": ScalarField2(
        lambda x, v: x + 0.0 * v, _const(1.0), _const(0.0), _const(0.0), "linear"
    ),
    "quadratic": ScalarField2(
        lambda x, v: x * x + 0.0 * v,
        lambda x, v: 2.0 * x + 0.0 * v,
        _const(0.0),
        _const(2.0),
        "quadratic",
    ),
    "bilinear": ScalarField2(
        lambda x, v: x * v,
        lambda x, v: v + 0.0 * x,
        lambda x, v: x + 0.0 * v,
        _const(0.0),
        "bilinear",
    ),
    "sin-shift": ScalarField2(
        lambda x, v: np.sin(x) + v,
        lambda x, v: np.cos(x) + 0.0 * v,
        _const(1.0),
        lambda x, v: -np.sin(x) + 0.0 * v,
        "sin-shift",
    ),
    "state": ScalarField2(
        lambda x, v: v + 0.0 * x, _const(0.0), _const(1.0), _const(0.0), "state"
    ),
    "identity-g": ScalarField2(
        lambda x, v: x + 0.0 * v, _const(1.0), _const(0.0), _const(0.0), "identity-g"
    ),
    "square-g": ScalarField2(
        lambda x, v: x * x + v,
        lambda x, v: 2.0 * x + 0.0 * v,
        _const(1.0),
        _const(2.0),
        "square-g",
    ),
}


def field_by_name(name: str) -> ScalarField2:
    try:
        return FIELDS[name]
    except KeyError:
        raise DomainError(
            f"unknown field {name!r}; choose from {', '.join(FIELDS)}"
        ) from None
