"""Constructive oscillation counterexamples for Fourier-series measures.

Two greedy constructions choose the coefficient profile:

* :func:`construct_oscillator1` makes the normalised quadratic variation
  f(eps) = sum_i alpha_i sin(i eps/2)**2 / (i**2 eps) alternate between values
  above 1/2 and below 1/4 as eps decreases;
* :func:`construct_oscillator2` makes S_n = sum_k mu(Delta_kn)**2 over dyadic
  partitions alternate between at least 2 and below 1.

Every inequality is certified from exact finite sums plus explicit tail
bounds, and certificates can be re-checked from their JSON form alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import BudgetExceeded, DomainError
from .measure import TWO_PI, CoefficientProfile, FourierSM, RademacherSequence, sine_sum_uniform

CHUNK = 2**20
_ULP = 2.0**-52

DEFAULT_MARGIN = 1e-3
MAX_INDEX = 2**26
MIN_EPS = 2.0**-20


def _qv_terms(i: np.ndarray, eps: float) -> np.ndarray:
    fi = i.astype(float)
    return np.sin(fi * eps / 2) ** 2 / (fi * fi * eps)


def _range_sum(lo: int, hi: int, eps: float) -> float:
    """sum_{i=lo}^{hi} sin(i eps/2)**2 / (i**2 eps), chunked and compensated."""
    parts = []
    for a in range(lo, hi + 1, CHUNK):
        b = min(hi, a + CHUNK - 1)
        parts.append(math.fsum(_qv_terms(np.arange(a, b + 1), eps)))
    return math.fsum(parts)


def _rounding_bound(value: float, count: int) -> float:
    # each term carries a few ulps from sin, squaring and division
    return 8 * _ULP * value + count * 1e-300


@dataclass(frozen=True)
class ParsevalCheck:
    partial_sum: float
    tail_bound: float
    target: float

    @property
    def holds(self) -> bool:
        slack = _rounding_bound(self.partial_sum, 0)
        return abs(self.partial_sum - self.target) <= self.tail_bound + slack


def parseval_check(eps: float, M: int) -> ParsevalCheck:
    """Partial sum of sin(i eps/2)**2/(i**2 eps) up to M against (2 pi - eps)/8."""
    if not 0 < eps < TWO_PI:
        raise DomainError("eps must lie in (0, 2 pi)")
    if M < 1:
        raise DomainError("M must be positive")
    return ParsevalCheck(_range_sum(1, M, eps), 1.0 / (M * eps), (TWO_PI - eps) / 8)


def f_of_eps(profile: CoefficientProfile, eps: float, M: int) -> tuple[float, float]:
    """f(eps) over profile indices <= M and a bound for the rest."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    total = []
    for m, n in profile:
        if m > M:
            break
        hi = M if n is None else min(n, M)
        total.append(_range_sum(m, hi, eps))
    top = profile.max_index
    error = 1.0 / (M * eps) if top is None or top > M else 0.0
    return math.fsum(total), error


def _tail_bound(m: int, eps: float) -> float:
    """Upper bound of sum_{i >= m} sin(i eps/2)**2/(i**2 eps) via sum 1/i**2 < 1/(m-1)."""
    return 1.0 / ((m - 1) * eps)


@dataclass
class Oscillator1Certificate:
    """Blocks [m_j, n_j], the eps sequence and certified values of f.

    ``eps_sequence[2k]`` carries a lower bound above 1/2 (odd steps of the
    construction), ``eps_sequence[2k+1]`` an upper bound below 1/4.  Upper
    bounds include the tail beyond ``tail_starts[k]`` so they hold for any
    later blocks as well.
    """

    blocks: list
    eps_sequence: list
    f_values: list
    f_errors: list
    tail_starts: list
    tail_bounds: list
    margin: float = DEFAULT_MARGIN

    @property
    def profile(self) -> CoefficientProfile:
        return CoefficientProfile(self.blocks)

    @property
    def depth(self) -> int:
        return len(self.eps_sequence) // 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = "oscillator1"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Oscillator1Certificate":
        d = {k: v for k, v in d.items() if k != "kind"}
        d["blocks"] = [list(b) for b in d["blocks"]]
        return cls(**d)


def _first_exceeding(m: int, eps: float, target: float, max_index: int) -> int:
    """Smallest n >= m with sum_{i=m}^{n} terms > target (doubling, then scan)."""
    span = 64
    while True:
        hi = m + span - 1
        if hi > max_index:
            raise BudgetExceeded(f"block sum stays below {target} up to index {max_index}")
        total = _range_sum(m, hi, eps)
        if total > target:
            break
        span *= 2
    lo = m + span // 2 if span > 64 else m
    base = _range_sum(m, lo - 1, eps) if lo > m else 0.0
    csum = base + np.cumsum(_qv_terms(np.arange(lo, hi + 1), eps))
    k = int(np.argmax(csum > target))
    n = lo + k
    # cumsum rounding: step forward until the compensated sum agrees
    while _range_sum(m, n, eps) <= target:
        n += 1
    return n


def _blocks_sum(blocks, eps: float) -> float:
    return math.fsum(_range_sum(m, n, eps) for m, n in blocks)


def _halve_until(cond, eps: float, min_eps: float) -> float:
    while not cond(eps):
        eps /= 2
        if eps < min_eps:
            raise BudgetExceeded(f"eps search went below {min_eps}")
    return eps


def construct_oscillator1(
    depth: int,
    margin: float = DEFAULT_MARGIN,
    max_index: int = MAX_INDEX,
    min_eps: float = MIN_EPS,
) -> Oscillator1Certificate:
    """Greedy choice of blocks and eps making f(eps) oscillate ``depth`` times."""
    if depth < 1:
        raise DomainError("depth must be at least 1")
    if not 0 < margin < 0.125:
        raise DomainError("margin must lie in (0, 1/8)")
    high = 0.5 + margin
    head_cap = (TWO_PI - 1) / 8 - 0.5 - margin
    cert = Oscillator1Certificate([], [], [], [], [], [], margin)

    m, eps = 1, 1.0
    for j in range(depth):
        try:
            if j > 0:
                # all indices below m must contribute little at the next eps
                eps = _halve_until(
                    lambda e: _range_sum(1, m - 1, e) < head_cap, eps / 2, min_eps
                )
            n = _first_exceeding(m, eps, high, max_index)
            cert.blocks.append([m, n])
            value = _range_sum(m, n, eps)
            cert.eps_sequence.append(eps)
            cert.f_values.append(value)
            cert.f_errors.append(_rounding_bound(value, n - m + 1))

            eps = _halve_until(
                lambda e: _blocks_sum(cert.blocks, e) < 0.125 - margin, eps / 2, min_eps
            )
            m = max(n + 1, int(math.floor(1.0 / (eps * (0.125 - margin)))) + 2)
            if m > max_index:
                raise BudgetExceeded(f"next block would start past {max_index}")
            head = _blocks_sum(cert.blocks, eps)
            cert.eps_sequence.append(eps)
            cert.f_values.append(head)
            cert.f_errors.append(_rounding_bound(head, n))
            cert.tail_starts.append(m)
            cert.tail_bounds.append(_tail_bound(m, eps))
        except BudgetExceeded as exc:
            _trim(cert)
            raise BudgetExceeded(str(exc), partial=cert) from None
    return cert


def _trim(cert: Oscillator1Certificate) -> None:
    """Drop a half-finished oscillation so the partial certificate stays valid."""
    k = len(cert.tail_starts)
    del cert.blocks[k:]
    del cert.eps_sequence[2 * k :]
    del cert.f_values[2 * k :]
    del cert.f_errors[2 * k :]


def _slow_f(blocks, eps: float) -> float:
    """f(eps) over finite blocks with math.sin, term by term (independent route)."""
    return math.fsum(
        math.sin(i * eps / 2) ** 2 / (i * i * eps) for m, n in blocks for i in range(m, n + 1)
    )


def verify_oscillator1(cert: Oscillator1Certificate) -> list[str]:
    """Re-sum every recorded value; returns a list of violated claims (empty if sound)."""
    problems = []
    blocks = [tuple(b) for b in cert.blocks]
    try:
        CoefficientProfile(blocks)
    except DomainError as exc:
        return [f"invalid profile: {exc}"]
    eps = cert.eps_sequence
    if len(eps) != 2 * len(blocks) or len(cert.tail_starts) != len(blocks):
        return ["certificate lists have inconsistent lengths"]
    if any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
        problems.append("eps sequence is not strictly decreasing and positive")
    for k in range(len(blocks)):
        e_hi, e_lo = eps[2 * k], eps[2 * k + 1]
        m, n = blocks[k]
        lower = _slow_f([blocks[k]], e_hi)
        err = _rounding_bound(lower, n - m + 1)
        if not lower - err > 0.5:
            problems.append(f"f(eps_{2 * k + 1}) lower bound {lower} is not above 1/2")
        if abs(lower - cert.f_values[2 * k]) > err + cert.f_errors[2 * k]:
            problems.append(f"recorded f(eps_{2 * k + 1}) does not re-sum")
        start = cert.tail_starts[k]
        if k + 1 < len(blocks) and blocks[k + 1][0] < start:
            problems.append(f"block {k + 2} starts before the certified tail at {start}")
        head = _slow_f(blocks[: k + 1], e_lo)
        err = _rounding_bound(head, n)
        upper = head + err + _tail_bound(start, e_lo)
        if not upper < 0.25:
            problems.append(f"f(eps_{2 * k + 2}) upper bound {upper} is not below 1/4")
        if abs(head - cert.f_values[2 * k + 1]) > err + cert.f_errors[2 * k + 1]:
            problems.append(f"recorded f(eps_{2 * k + 2}) does not re-sum")
    return problems


def quadratic_variation_mc(
    profile: CoefficientProfile, eps: float, grid_points: int, seed: int
) -> float:
    """Riemann sum of integral_{(0, 2 pi]} (mu_{s+eps} - mu_s)**2 / eps ds for one sign draw."""
    if grid_points < 2**10:
        raise DomainError("use at least 2**10 grid points")
    if not eps > 0:
        raise DomainError("eps must be positive")
    sm = FourierSM(profile, RademacherSequence(seed), T1=TWO_PI + eps)
    idx, amp = sm.support
    ds = TWO_PI / grid_points
    left = sine_sum_uniform(idx, amp, 0.0, ds, grid_points)
    right = sine_sum_uniform(idx, amp, eps, ds, grid_points)
    return math.fsum((right - left) ** 2) * ds / eps


def _dyadic_energy(i: np.ndarray, n: int) -> np.ndarray:
    """sum_k (integral over Delta_kn of cos(i t) dt)**2 for each index i."""
    N = 2**n
    fi = i.astype(float)
    out = 2.0 * N * np.sin(fi * math.pi / N) ** 2 / (fi * fi)
    # when N divides 2i the cos(2 i t) sum over cell midpoints does not vanish
    out[(2 * i) % N == 0] = 0.0
    return out


def _profile_energy(profile: CoefficientProfile, n: int) -> float:
    parts = []
    for m, hi in profile:
        for a in range(m, hi + 1, CHUNK):
            b = min(hi, a + CHUNK - 1)
            parts.append(math.fsum(_dyadic_energy(np.arange(a, b + 1), n)))
    return math.fsum(parts)


def diagonal_S(profile: CoefficientProfile, n: int) -> float:
    """S_n = 2 sum_i alpha_i (2**n / i**2) sin(i pi / 2**n)**2.

    Exact value of sum_k mu(Delta_kn)**2 for every sign draw when all indices
    are below 2**(n-1), since then every cross term cancels.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    top = profile.max_index
    if top is None or top >= 2 ** (n - 1):
        raise DomainError(
            f"profile reaches index {top}; diagonal form needs indices < 2**{n - 1}"
        )
    return _profile_energy(profile, n) if top else 0.0


def expected_tail_energy(profile: CoefficientProfile, n: int) -> float:
    """E[sum_k mu(Delta_kn)**2] contributed by ``profile`` (cross terms average out)."""
    if not profile.is_finite:
        raise DomainError("expected energy needs a finite profile")
    return _profile_energy(profile, n)


def dyadic_S(profile: CoefficientProfile, n: int, seed: int) -> float:
    """sum_k mu(Delta_kn)**2 on [0, 2 pi] for one sign draw, via FFT."""
    sm = FourierSM(profile, RademacherSequence(seed))
    idx, amp = sm.support
    N = 2**n
    vals = sine_sum_uniform(idx, amp, 0.0, TWO_PI / N, N + 1)
    return math.fsum(np.diff(vals) ** 2)


@dataclass
class Oscillator2Certificate:
    """Dyadic blocks [2**(n_j-2), 2**(n_j-1)-1] with the scales n_j < n~_j.

    ``S_lower[j]`` is the diagonal S at n_j over blocks up to j, ``A_values[j]``
    the diagonal S at n~_j over the same blocks, ``EB_values[j]`` the expected
    energy of all later blocks at n~_j, and ``S_tilde_samples[j]`` the
    Monte Carlo S at n~_j for the full profile.
    """

    scales: list
    scale_pairs: list
    S_lower: list
    A_values: list
    EB_values: list
    seeds: int
    first_seed: int = 0
    S_tilde_samples: list = field(default_factory=list)
    A_cap: float = 0.25
    EB_cap: float = 1.0 / 16

    @property
    def blocks(self) -> list:
        return [[2 ** (n - 2), 2 ** (n - 1) - 1] for n in self.scales]

    @property
    def profile(self) -> CoefficientProfile:
        return CoefficientProfile(self.blocks)

    def fraction_below(self, level: float = 1.0) -> list[float]:
        return [float(np.mean(np.asarray(s) < level)) for s in self.S_tilde_samples]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = "oscillator2"
        d["blocks"] = self.blocks
        d["fraction_below_1"] = self.fraction_below()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Oscillator2Certificate":
        keep = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        keep["scale_pairs"] = [list(p) for p in keep["scale_pairs"]]
        return cls(**keep)


def construct_oscillator2(
    depth: int,
    seeds: int,
    first_scale: int = 2,
    first_seed: int = 0,
    max_scale: int = 26,
) -> Oscillator2Certificate:
    """Greedy dyadic scales making S_n oscillate ``depth`` times.

    For each j: block at n_j, then the first n~_j > n_j with A < 1/4, then the
    first n_{j+1} > n~_j whose block adds less than 1/32 expected energy at
    n~_j (half the 1/16 budget, leaving room for every later block).
    """
    if depth < 1:
        raise DomainError("depth must be at least 1")
    if first_scale < 2:
        raise DomainError("first_scale must be at least 2")
    cert = Oscillator2Certificate([], [], [], [], [], seeds, first_seed)
    n = first_scale
    for j in range(depth):
        cert.scales.append(n)
        blocks = CoefficientProfile(cert.blocks)
        cert.S_lower.append(diagonal_S(blocks, n))
        nt = n + 1
        while diagonal_S(blocks, nt) >= cert.A_cap:
            nt += 1
            if nt > max_scale:
                raise BudgetExceeded("A stays above 1/4", partial=cert)
        cert.scale_pairs.append([n, nt])
        cert.A_values.append(diagonal_S(blocks, nt))
        if j + 1 < depth:
            n = nt + 1
            while (
                expected_tail_energy(CoefficientProfile([(2 ** (n - 2), 2 ** (n - 1) - 1)]), nt)
                >= cert.EB_cap / 2
            ):
                n += 1
                if n > max_scale:
                    raise BudgetExceeded("no block scale with small expected tail", partial=cert)
    profile = cert.profile
    for j, (_, nt) in enumerate(cert.scale_pairs):
        later = CoefficientProfile(cert.blocks[j + 1 :])
        cert.EB_values.append(expected_tail_energy(later, nt))
        cert.S_tilde_samples.append(
            [dyadic_S(profile, nt, s) for s in range(first_seed, first_seed + seeds)]
        )
    return cert


def verify_oscillator2(cert: Oscillator2Certificate) -> list[str]:
    """Recompute every deterministic claim; returns violated claims."""
    problems = []
    prev = 0
    for j, (n, nt) in enumerate(cert.scale_pairs):
        if not prev < n < nt:
            problems.append(f"scales not strictly increasing at pair {j + 1}")
        prev = nt
        blocks = CoefficientProfile(cert.blocks[: j + 1])
        S = diagonal_S(blocks, n)
        if not S >= 2:
            problems.append(f"S at n_{j + 1} = {S} is below 2")
        if abs(S - cert.S_lower[j]) > 1e-12 * max(1.0, S):
            problems.append(f"recorded S at n_{j + 1} does not re-sum")
        A = diagonal_S(blocks, nt)
        if not A < cert.A_cap:
            problems.append(f"A at n~_{j + 1} = {A} is not below {cert.A_cap}")
        EB = expected_tail_energy(CoefficientProfile(cert.blocks[j + 1 :]), nt)
        if not EB < cert.EB_cap:
            problems.append(f"E[B] at n~_{j + 1} = {EB} is not below {cert.EB_cap}")
    return problems
