"""Pathwise solution of o dX = sigma(X) o dmu + b(X, t) dt.

X_t = F(mu_t, Y_t), where F is the flow of dF/dr = sigma(F) and Y solves the
random ODE

    Y' = b(F(mu_s, Y), s) / F_x(mu_s, Y),   Y_0 = X_0.

F and F_x are tabulated once on a rectangle covering the reachable (r, x)
set and evaluated by cubic Hermite interpolation; the r-slopes come from the
flow equation itself, so no derivative is estimated numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .calculus import ScalarField2
from .errors import ContractError, DomainError, FlowBlowUp
from .integration import Partition, stieltjes_integral, symmetric_sum
from .measure import SampledPath

DEFAULT_H = 1e-3
DEFAULT_DR = 1e-2
X_NODES = 1024


@dataclass(frozen=True)
class Sigma:
    value: Callable
    d1: Callable
    d2: Callable
    derivative_bound: float
    name: str = ""

    def check(self, box: tuple[float, float], n: int = 101) -> None:
        x = np.linspace(box[0], box[1], n)
        worst = max(np.max(np.abs(self.d1(x))), np.max(np.abs(self.d2(x))))
        if worst > self.derivative_bound * (1 + 1e-12):
            raise ContractError(
                f"sigma derivatives reach {worst:.3g} > bound {self.derivative_bound}"
            )


@dataclass(frozen=True)
class Drift:
    value: Callable
    lipschitz_of_box: Callable[[float], float]
    linear_growth_K: float
    name: str = ""

    def check(self, box: tuple[float, float], t_range: tuple[float, float], n=41):
        x, t = np.meshgrid(np.linspace(*box, n), np.linspace(*t_range, n))
        b = np.broadcast_to(self.value(x, t), x.shape)
        if np.any(np.abs(b) > self.linear_growth_K * (1 + np.abs(x)) * (1 + 1e-12)):
            raise ContractError(f"drift {self.name} violates |b| <= K(1 + |x|)")


def _hermite(u, f0, s0, f1, s1, step):
    u2 = u * u
    u3 = u2 * u
    return (
        (2 * u3 - 3 * u2 + 1) * f0
        + (u3 - 2 * u2 + u) * step * s0
        + (3 * u2 - 2 * u3) * f1
        + (u3 - u2) * step * s1
    )


def _hermite_slope(u, f0, s0, f1, s1, step):
    u2 = u * u
    return (
        (6 * u2 - 6 * u) / step * f0
        + (3 * u2 - 4 * u + 1) * s0
        + (6 * u - 6 * u2) / step * f1
        + (3 * u2 - 2 * u) * s1
    )


@dataclass(frozen=True, eq=False)
class FlowTable:
    """F(r, x) and F_x(r, x) on a uniform (r, x) lattice.

    Rows are r-values, columns x-values; row r = 0 is exactly F = x.
    """

    r_grid: np.ndarray
    x_grid: np.ndarray
    F_values: np.ndarray
    dFdx_values: np.ndarray
    sigma: Sigma
    h: float

    @property
    def dr(self) -> float:
        return float(self.r_grid[1] - self.r_grid[0])

    @property
    def dx(self) -> float:
        return float(self.x_grid[1] - self.x_grid[0])

    @property
    def r_range(self) -> tuple[float, float]:
        return float(self.r_grid[0]), float(self.r_grid[-1])

    @property
    def x_range(self) -> tuple[float, float]:
        return float(self.x_grid[0]), float(self.x_grid[-1])

    def _locate(self, grid, q, what):
        step = grid[1] - grid[0]
        pos = (q - grid[0]) / step
        slack = 1e-9
        if np.any(pos < -slack) or np.any(pos > grid.size - 1 + slack):
            raise DomainError(
                f"{what} outside the flow table [{grid[0]:.6g}, {grid[-1]:.6g}]"
            )
        k = np.clip(np.floor(pos).astype(np.int64), 0, grid.size - 2)
        return k, pos - k

    def _rows(self, r, x):
        kr, ur = self._locate(self.r_grid, r, "r")
        jx, ux = self._locate(self.x_grid, x, "x")
        F, D, dx = self.F_values, self.dFdx_values, self.dx
        out = []
        for k in (kr, kr + 1):
            f0, f1 = F[k, jx], F[k, jx + 1]
            d0, d1 = D[k, jx], D[k, jx + 1]
            out.append(
                (
                    _hermite(ux, f0, d0, f1, d1, dx),
                    _hermite_slope(ux, f0, d0, f1, d1, dx),
                )
            )
        return ur, out

    def evaluate(self, r, x) -> tuple[np.ndarray, np.ndarray]:
        """(F(r, x), F_x(r, x)), broadcast over r and x."""
        r, x = np.broadcast_arrays(np.asarray(r, float), np.asarray(x, float))
        ur, ((fa, da), (fb, db)) = self._rows(r, x)
        s, s1 = self.sigma.value, self.sigma.d1
        F = _hermite(ur, fa, s(fa), fb, s(fb), self.dr)
        D = _hermite(ur, da, s1(fa) * da, db, s1(fb) * db, self.dr)
        return F, D

    def F(self, r, x):
        return self.evaluate(r, x)[0]

    def dFdx(self, r, x):
        return self.evaluate(r, x)[1]

    def dHdx(self, r, y):
        """Inverse-flow x-derivative, 1 / F_x(r, H(r, y))."""
        return 1.0 / self.dFdx(r, invert_flow(self, r, y))

    def point(self, r: float, x: float) -> tuple[float, float]:
        """Scalar (F, F_x) without array overhead; used inside the Y solver."""
        r0, x0 = self.r_grid[0], self.x_grid[0]
        dr, dx = self.dr, self.dx
        pr = (r - r0) / dr
        px = (x - x0) / dx
        nr, nx = self.r_grid.size, self.x_grid.size
        if not (-1e-9 <= pr <= nr - 1 + 1e-9):
            raise DomainError("r outside the flow table")
        if not (-1e-9 <= px <= nx - 1 + 1e-9):
            raise DomainError("x outside the flow table")
        k = min(max(int(math.floor(pr)), 0), nr - 2)
        j = min(max(int(math.floor(px)), 0), nx - 2)
        ur, ux = pr - k, px - j
        F, D = self.F_values, self.dFdx_values
        fa = _hermite(ux, F[k, j], D[k, j], F[k, j + 1], D[k, j + 1], dx)
        da = _hermite_slope(ux, F[k, j], D[k, j], F[k, j + 1], D[k, j + 1], dx)
        fb = _hermite(ux, F[k + 1, j], D[k + 1, j], F[k + 1, j + 1], D[k + 1, j + 1], dx)
        db = _hermite_slope(
            ux, F[k + 1, j], D[k + 1, j], F[k + 1, j + 1], D[k + 1, j + 1], dx
        )
        s, s1 = self.sigma.value, self.sigma.d1
        f = _hermite(ur, fa, float(s(fa)), fb, float(s(fb)), dr)
        d = _hermite(ur, da, float(s1(fa)) * da, db, float(s1(fb)) * db, dr)
        return float(f), float(d)


def _rk4_columns(sigma: Sigma, x: np.ndarray, steps: int, h: float, stride: int, box):
    """Integrate (F, F_x) from r = 0 for ``steps`` steps of size h.

    Returns the states after every ``stride`` steps (row 0 excluded).
    """
    F = x.copy()
    D = np.ones_like(x)
    s, s1 = sigma.value, sigma.d1
    rows_F, rows_D = [], []

    def rhs(f, d):
        return s(f) + 0.0 * f, s1(f) * d

    for n in range(1, steps + 1):
        k1f, k1d = rhs(F, D)
        k2f, k2d = rhs(F + 0.5 * h * k1f, D + 0.5 * h * k1d)
        k3f, k3d = rhs(F + 0.5 * h * k2f, D + 0.5 * h * k2d)
        k4f, k4d = rhs(F + h * k3f, D + h * k3d)
        F = F + h / 6.0 * (k1f + 2 * k2f + 2 * k3f + k4f)
        D = D + h / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
        if n % stride == 0:
            if not np.all(np.isfinite(F)) or F.min() < box[0] or F.max() > box[1]:
                raise FlowBlowUp(
                    f"flow left the safety box [{box[0]:.4g}, {box[1]:.4g}]"
                )
            rows_F.append(F)
            rows_D.append(D)
    return rows_F, rows_D


def _safety_box(sigma: Sigma, x_range, r_reach: float):
    lo, hi = x_range
    width = hi - lo
    L = sigma.derivative_bound
    # Gronwall: |F(r, x) - x| <= |sigma(x)| (e^{L r} - 1) / L
    growth = r_reach if L == 0 else math.expm1(L * r_reach) / L
    edge = float(np.max(np.abs(sigma.value(np.array([lo, hi])) + 0.0 * lo)))
    pad = 10.0 * (width + (edge + L * width) * growth)
    return lo - pad, hi + pad


def build_flow(
    sigma: Sigma,
    r_range: tuple[float, float],
    x_range: tuple[float, float],
    h: float = DEFAULT_H,
    dr: float = DEFAULT_DR,
    dx: float | None = None,
) -> FlowTable:
    """Tabulate the flow of dF/dr = sigma(F) with F(0, x) = x.

    Classical RK4 with fixed step ``h`` in r, jointly with the variational
    equation d(F_x)/dr = sigma'(F) F_x.  Rows are stored every ``dr``
    (rounded to a multiple of h); columns are spaced ``dx`` apart (default:
    the x-range split into 1024 cells).
    """
    if not h > 0:
        raise DomainError("h must be positive")
    if not all(map(math.isfinite, (*r_range, *x_range))):
        raise DomainError("flow ranges must be finite")
    if not x_range[1] > x_range[0]:
        raise DomainError("x_range must have positive width")
    stride = max(1, int(round(dr / h)))
    dr = stride * h
    k_lo = int(math.floor(min(r_range[0], 0.0) / dr - 1e-9))
    k_hi = int(math.ceil(max(r_range[1], 0.0) / dr + 1e-9))
    k_lo = min(k_lo, -1) if r_range[0] < 0 else min(k_lo, 0)
    k_hi = max(k_hi, 1)
    if dx is None:
        dx = (x_range[1] - x_range[0]) / X_NODES
    j_lo = int(math.floor(x_range[0] / dx))
    j_hi = int(math.ceil(x_range[1] / dx))
    x_grid = dx * np.arange(j_lo, j_hi + 1)
    box = _safety_box(sigma, (x_grid[0], x_grid[-1]), dr * max(-k_lo, k_hi))

    fwd_F, fwd_D = _rk4_columns(sigma, x_grid, k_hi * stride, h, stride, box)
    back_F, back_D = _rk4_columns(sigma, x_grid, -k_lo * stride, -h, stride, box)
    ones = np.ones_like(x_grid)
    F_rows = back_F[::-1] + [x_grid.copy()] + fwd_F
    D_rows = back_D[::-1] + [ones] + fwd_D
    F_values = np.array(F_rows)
    D_values = np.array(D_rows)
    F_values.setflags(write=False)
    D_values.setflags(write=False)
    r_grid = dr * np.arange(k_lo, k_hi + 1)
    r_grid[-k_lo] = 0.0
    return FlowTable(r_grid, x_grid, F_values, D_values, sigma, h)


def invert_flow(flow: FlowTable, r, y, iterations: int = 64):
    """H(r, y): the x with F(r, x) = y, by bisection plus one Newton step."""
    r, y = np.broadcast_arrays(np.asarray(r, float), np.asarray(y, float))
    lo_x, hi_x = flow.x_range
    lo = np.full(r.shape, lo_x)
    hi = np.full(r.shape, hi_x)
    f_lo = flow.F(r, lo)
    f_hi = flow.F(r, hi)
    if np.any(y < f_lo) or np.any(y > f_hi):
        raise DomainError("value outside the flow's range at this r")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = flow.F(r, mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(mid))):
            break
    x = 0.5 * (lo + hi)
    f, d = flow.evaluate(r, x)
    x = np.clip(x - (f - y) / d, lo_x, hi_x)
    return float(x) if x.ndim == 0 else x


def check_inverse_pde(
    flow: FlowTable, samples: int, step: float = 1e-4, seed: int = 0
) -> float:
    """Largest |H_r + sigma(x) H_x| at random interior points (central differences)."""
    rng = np.random.default_rng(seed)
    r_lo, r_hi = flow.r_range
    x_lo, x_hi = flow.x_range
    pad_r = 0.1 * (r_hi - r_lo) + step
    pad_x = 0.2 * (x_hi - x_lo)
    r = rng.uniform(r_lo + pad_r, r_hi - pad_r, samples)
    x = flow.F(r, rng.uniform(x_lo + pad_x, x_hi - pad_x, samples))
    H_r = (invert_flow(flow, r + step, x) - invert_flow(flow, r - step, x)) / (2 * step)
    H_x = (invert_flow(flow, r, x + step) - invert_flow(flow, r, x - step)) / (2 * step)
    sig = flow.sigma.value(x) + 0.0 * x
    return float(np.max(np.abs(H_r + sig * H_x)))


@dataclass
class SDESolution:
    X: SampledPath
    Y: SampledPath
    flow: FlowTable
    diagnostics: dict = field(default_factory=dict)


def _flow_ranges(mu: SampledPath, x_center: float, x_half: float):
    lo, hi = float(mu.values.min()), float(mu.values.max())
    pad = 0.25 * max(hi - lo, 1e-3)
    return (min(lo - pad, 0.0), max(hi + pad, 0.0)), (x_center - x_half, x_center + x_half)


def solve_sde(
    sigma: Sigma,
    b: Drift,
    X0: float,
    mu: SampledPath,
    h: float = DEFAULT_H,
    max_widenings: int = 24,
) -> SDESolution:
    """Doss-Sussmann solution on mu's grid.

    Y is advanced by RK4 with sub-steps of at most ``h`` inside each grid
    cell, mu being linear between its samples.  When Y leaves the tabulated
    x-range the flow is rebuilt on a wider range.
    """
    if mu.t0 != 0.0:
        raise DomainError("the driving path must start at t = 0")
    half = 0.25 * max(1.0, abs(X0))
    r_range, x_range = _flow_ranges(mu, X0, half)
    flow = build_flow(sigma, r_range, x_range, h)
    widenings = 0

    def ensure(y):
        nonlocal flow, widenings
        lo, hi = flow.x_range
        if lo <= y <= hi:
            return
        if not math.isfinite(y):
            raise FlowBlowUp("Y became non-finite")
        if widenings >= max_widenings:
            raise FlowBlowUp(f"Y = {y:.6g} left the flow range after {widenings} widenings")
        reach = 2.0 * max(hi - lo, abs(y))
        new = (min(lo, y - reach), max(hi, y + reach))
        flow = build_flow(sigma, r_range, new, h)
        widenings += 1

    bval = b.value

    def rhs(s, r, y):
        ensure(y)
        f, d = flow.point(r, y)
        return float(bval(f, s)) / d

    vals = mu.values
    n = vals.size
    dt = mu.dt
    sub = max(1, int(math.ceil(dt / h - 1e-9)))
    hs = dt / sub
    Y = np.empty(n)
    y = float(X0)
    Y[0] = y
    for k in range(n - 1):
        m0, dm = vals[k], (vals[k + 1] - vals[k]) / sub
        t = k * dt
        for i in range(sub):
            s0 = t + i * hs
            r0 = m0 + i * dm
            k1 = rhs(s0, r0, y)
            k2 = rhs(s0 + hs / 2, r0 + dm / 2, y + hs / 2 * k1)
            k3 = rhs(s0 + hs / 2, r0 + dm / 2, y + hs / 2 * k2)
            k4 = rhs(s0 + hs, r0 + dm, y + hs * k3)
            y = y + hs / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        Y[k + 1] = y
    ensure(float(Y.min()))
    ensure(float(Y.max()))
    X = flow.F(vals, Y)
    diag = {
        "flow_widenings": widenings,
        "flow_r_range": list(flow.r_range),
        "flow_x_range": list(flow.x_range),
        "substeps_per_cell": sub,
    }
    return SDESolution(mu.with_values(X), mu.with_values(Y), flow, diag)


def verify_solution_identity(
    sol: SDESolution,
    sigma: Sigma,
    b: Drift,
    mu: SampledPath,
    psi: ScalarField2,
    p: Partition,
) -> float:
    """|int Z o dX - int Z sigma(X) o dmu - int Z b(X, s) ds| with Z = psi(mu, X)."""
    X = sol.X
    x = X.values
    t = mu.times
    Z = psi(mu.values, x)
    lhs = symmetric_sum(X.with_values(Z), X, p)
    noise = symmetric_sum(mu.with_values(Z * (sigma.value(x) + 0.0 * x)), mu, p)
    clock = mu.with_values(t)
    drift = stieltjes_integral(mu.with_values(Z * (bval_array(b, x, t))), clock, p)
    return abs(lhs - noise - drift)


def bval_array(b: Drift, x, t) -> np.ndarray:
    x = np.asarray(x, float)
    return np.broadcast_to(b.value(x, t), x.shape).astype(float)


def sigma_by_name(name: str, c: float = 1.0) -> Sigma:
    if name == "const-sigma":
        return Sigma(lambda x: c + 0.0 * x, lambda x: 0.0 * x, lambda x: 0.0 * x, 1.0, name)
    if name == "linear-sigma":
        return Sigma(lambda x: 1.0 * x, lambda x: 1.0 + 0.0 * x, lambda x: 0.0 * x, 1.0, name)
    if name == "zero-sigma":
        return Sigma(lambda x: 0.0 * x, lambda x: 0.0 * x, lambda x: 0.0 * x, 1.0, name)
    raise DomainError(f"unknown sigma {name!r}; choose from {', '.join(SIGMAS)}")


def drift_by_name(name: str, K: float = 1.0) -> Drift:
    if name == "zero-drift":
        return Drift(lambda x, t: 0.0 * x, lambda C: 0.0, K, name)
    if name == "linear-drift":
        return Drift(lambda x, t: 1.0 * x, lambda C: 1.0, max(K, 1.0), name)
    if name == "unit-drift":
        return Drift(lambda x, t: 1.0 + 0.0 * x, lambda C: 0.0, max(K, 1.0), name)
    if name == "bounded-drift":
        return Drift(lambda x, t: K * x / (1.0 + x * x), lambda C: K, K, name)
    raise DomainError(f"unknown drift {name!r}; choose from {', '.join(DRIFTS)}")


SIGMAS = ("const-sigma", "linear-sigma", "zero-sigma")
DRIFTS = ("zero-drift", "linear-drift", "unit-drift", "bounded-drift")
