"""Partitions, symmetric integral sums and variation functionals."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .measure import FourierSM, SampledPath, TWO_PI, sine_sum_uniform

DEFAULT_TOL = 1e-3
CONVERGENCE_WINDOW = 3


@dataclass(frozen=True, eq=False)
class Partition:
    """Strictly increasing points 0 = t_0 < ... < t_j = T."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise DomainError("a partition needs at least two points")
        if pts[0] != 0.0:
            raise DomainError("a partition starts at 0")
        if not np.all(np.diff(pts) > 0):
            raise DomainError("partition points must increase strictly")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def T(self) -> float:
        return float(self.points[-1])

    @property
    def mesh(self) -> float:
        return float(np.diff(self.points).max())

    def __len__(self):
        return self.points.size

    @property
    def is_uniform(self) -> bool:
        d = np.diff(self.points)
        return bool(np.allclose(d, d[0], rtol=1e-12, atol=0))

    def refine(self, t: float) -> "Partition":
        """Insert one point."""
        return Partition(np.sort(np.append(self.points, t)))


def uniform_partition(T: float, j: int) -> Partition:
    if j < 1:
        raise DomainError("j must be at least 1")
    if not T > 0:
        raise DomainError("T must be positive")
    return Partition(np.linspace(0.0, T, j + 1))


def dyadic_partition(T: float, n: int) -> Partition:
    if n < 0:
        raise DomainError("dyadic level must be nonnegative")
    if n > 32:
        raise MemoryError(f"2**{n} + 1 partition points do not fit in memory")
    return uniform_partition(T, 2**n)


def _midpoint_sum(x: np.ndarray, y: np.ndarray) -> float:
    return math.fsum(0.5 * (x[:-1] + x[1:]) * np.diff(y))


def _on_partition(path: SampledPath, p: Partition) -> np.ndarray:
    if not path.covers(0.0, p.T):
        raise DomainError(
            f"partition [0, {p.T}] exceeds path domain [{path.t0}, {path.t_end}]"
        )
    return path(p.points)


def symmetric_sum(xi: SampledPath, eta: SampledPath, p: Partition) -> float:
    """sum_k (xi(t_{k-1}) + xi(t_k)) / 2 * (eta(t_k) - eta(t_{k-1}))."""
    return _midpoint_sum(_on_partition(xi, p), _on_partition(eta, p))


def stieltjes_integral(f_values: SampledPath, V: SampledPath, p: Partition) -> float:
    """Integral of f against a bounded-variation path V.

    Endpoint weighting is the same as in :func:`symmetric_sum`; for a
    continuous BV integrator the limit is the ordinary Stieltjes integral.
    """
    return _midpoint_sum(_on_partition(f_values, p), _on_partition(V, p))


@dataclass
class ConvergenceReport:
    """Partition sums along a refinement sequence.

    ``converged`` holds iff the last ``window`` estimates pairwise differ by
    less than ``tol``.  It is a per-path diagnostic, not a certificate of
    convergence in probability.
    """

    estimates: list
    extrapolated_value: float
    converged: bool
    spread: float
    tol: float = DEFAULT_TOL
    window: int = CONVERGENCE_WINDOW

    def to_dict(self) -> dict:
        return {
            "estimates": [[float(m), float(v)] for m, v in self.estimates],
            "extrapolated": float(self.extrapolated_value),
            "converged": bool(self.converged),
            "spread": float(self.spread),
            "tol": float(self.tol),
            "window": int(self.window),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ConvergenceReport":
        return cls(
            [tuple(e) for e in d["estimates"]],
            d["extrapolated"],
            d["converged"],
            d["spread"],
            d.get("tol", DEFAULT_TOL),
            d.get("window", CONVERGENCE_WINDOW),
        )


def report_from_estimates(estimates, tol: float) -> ConvergenceReport:
    values = [v for _, v in estimates[-CONVERGENCE_WINDOW:]]
    spread = max(values) - min(values)
    return ConvergenceReport(
        list(estimates), estimates[-1][1], spread < tol, spread, tol
    )


def check_refinement(refinement: Sequence[Partition]) -> None:
    if len(refinement) < CONVERGENCE_WINDOW:
        raise DomainError(
            f"need at least {CONVERGENCE_WINDOW} partitions, got {len(refinement)}"
        )
    meshes = [p.mesh for p in refinement]
    if any(b >= a for a, b in zip(meshes, meshes[1:])):
        raise DomainError("partition meshes must decrease strictly")


def symmetric_integral(
    xi: SampledPath,
    eta: SampledPath,
    refinement: Sequence[Partition],
    tol: float = DEFAULT_TOL,
) -> ConvergenceReport:
    check_refinement(refinement)
    estimates = [(p.mesh, symmetric_sum(xi, eta, p)) for p in refinement]
    return report_from_estimates(estimates, tol)


def strong_variation_estimate(
    path: SampledPath, n: int, eps: float, T1: float
) -> float:
    """(1/eps) * integral over [0, T1] of |path(s + eps) - path(s)|**n ds.

    Left-endpoint Riemann sum with the path's own grid nodes as quadrature
    nodes; the last cell is clipped at T1.
    """
    if n < 2:
        raise DomainError("n must be at least 2")
    if not eps > 0:
        raise DomainError("eps must be positive")
    T = path.t_end
    if not eps < T - T1:
        raise DomainError(f"eps = {eps} must be below T - T1 = {T - T1}")
    if path.t0 > 0:
        raise DomainError("the path must start at 0")
    nodes = path.times
    nodes = nodes[nodes < T1]
    weights = np.diff(np.append(nodes, T1))
    inc = np.abs(path(nodes + eps) - path.values[: nodes.size])
    return math.fsum(weights * inc**n) / eps


def sum_squared_increments(sm: FourierSM, p: Partition) -> float:
    """sum_k mu((t_{k-1}, t_k])**2 from exact interval measures."""
    if p.T > sm.T1 * (1 + 1e-12):
        raise DomainError(f"partition ends past T1 = {sm.T1}")
    idx, amp = sm.support
    if p.is_uniform:
        vals = sine_sum_uniform(idx, amp, 0.0, p.T / (len(p) - 1), len(p))
    else:
        vals = sm.values_at(p.points)
    return math.fsum(np.diff(vals) ** 2)


def boundedness_quantile(
    experiment: Callable[[int], float],
    seeds: int,
    q: float,
    first_seed: int = 0,
    threads: int | None = None,
) -> float:
    """Empirical q-quantile of ``experiment(seed)`` over consecutive seeds."""
    if seeds < 10:
        raise DomainError("use at least 10 seeds")
    if not 0 < q < 1:
        raise DomainError("q must lie in (0, 1)")
    seed_list = range(first_seed, first_seed + seeds)
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            outputs = list(pool.map(experiment, seed_list))
    else:
        outputs = [experiment(s) for s in seed_list]
    return float(np.quantile(np.sort(np.asarray(outputs, dtype=float)), q))
