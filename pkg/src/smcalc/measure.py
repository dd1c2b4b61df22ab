"""Random Fourier-series stochastic measures.

The measure of a Borel set A in [0, T1] is

    mu(A) = sum_i alpha_i * s_i * integral_A cos(i t) dt

with alpha_i in {0, 1} given by a :class:`CoefficientProfile` and s_i random
signs from a :class:`RademacherSequence`.  The associated process is
mu_t = mu((0, t]) = sum_i alpha_i s_i sin(i t) / i.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * math.pi

# Tail bounds for infinite profiles hold with probability >= 1 - TAIL_DELTA
# over the signs (Hoeffding); a deterministic bound does not exist because
# sum 1/i diverges.
TAIL_DELTA = 1e-9
_HOEFFDING = math.sqrt(2.0 * math.log(2.0 / TAIL_DELTA))

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class CoefficientProfile:
    """The {0,1} coefficient sequence as sorted disjoint integer blocks.

    ``intervals`` holds closed ranges ``(m, n)``.  The last block may have
    ``n=None``, meaning every index from ``m`` on is switched on.
    """

    def __init__(self, intervals: Iterable[Sequence[int | None]] = ()):
        blocks = []
        for pair in intervals:
            m, n = pair
            m = int(m)
            n = None if n is None else int(n)
            if m < 1:
                raise DomainError(f"block start must be >= 1, got {m}")
            if n is not None and n < m:
                raise DomainError(f"empty block [{m}, {n}]")
            blocks.append((m, n))
        for (m0, n0), (m1, _) in zip(blocks, blocks[1:]):
            if n0 is None:
                raise DomainError("only the last block may be unbounded")
            if not n0 < m1:
                raise DomainError("blocks must be sorted and disjoint")
        self._intervals = tuple(blocks)

    @classmethod
    def full(cls) -> "CoefficientProfile":
        """Every coefficient equal to one."""
        return cls([(1, None)])

    @property
    def intervals(self) -> tuple:
        return self._intervals

    @property
    def is_finite(self) -> bool:
        return not self._intervals or self._intervals[-1][1] is not None

    @property
    def max_index(self) -> int | None:
        """Largest switched-on index, 0 for the empty profile, None if unbounded."""
        if not self._intervals:
            return 0
        return self._intervals[-1][1]

    def alpha(self, i: int) -> int:
        for m, n in self._intervals:
            if i < m:
                return 0
            if n is None or i <= n:
                return 1
        return 0

    def indices(self, upper: int | None = None) -> np.ndarray:
        """Switched-on indices, capped at ``upper`` (required if unbounded)."""
        if upper is None and not self.is_finite:
            raise DomainError("an upper index is needed for an unbounded profile")
        parts = []
        for m, n in self._intervals:
            hi = n if n is not None else upper
            if upper is not None:
                hi = min(hi, upper)
            if hi >= m:
                parts.append(np.arange(m, hi + 1, dtype=np.int64))
        if not parts:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(parts)

    def count(self, upper: int | None = None) -> int:
        total = 0
        for m, n in self._intervals:
            hi = n if n is not None else upper
            if upper is not None:
                hi = min(hi, upper)
            total += max(0, hi - m + 1)
        return total

    def with_block(self, m: int, n: int | None) -> "CoefficientProfile":
        return CoefficientProfile(self._intervals + ((m, n),))

    def to_json(self) -> str:
        return json.dumps([list(b) for b in self._intervals])

    @classmethod
    def from_json(cls, text: str) -> "CoefficientProfile":
        data = json.loads(text)
        if not isinstance(data, list) or any(
            not isinstance(b, list) or len(b) != 2 for b in data
        ):
            raise DomainError("profile JSON must be an array of [m, n] pairs")
        return cls(data)

    def __iter__(self):
        return iter(self._intervals)

    def __eq__(self, other):
        return isinstance(other, CoefficientProfile) and self._intervals == other._intervals

    def __hash__(self):
        return hash(self._intervals)

    def __repr__(self):
        return f"CoefficientProfile({list(self._intervals)})"


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class RademacherSequence:
    """Random signs s_i as a pure function of ``(seed, i)``.

    Counter-based: each sign is a SplitMix64 hash of the seed-derived key and
    the index, so queries can come in any order.
    """

    seed: int
    negate: bool = False

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    def signs(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size and idx.min() < 1:
            raise DomainError("sign indices start at 1")
        key = _splitmix64(np.array([self.seed], dtype=np.uint64))[0]
        with np.errstate(over="ignore"):
            h = _splitmix64(key + idx.astype(np.uint64) * _GOLDEN)
        s = 1.0 - 2.0 * (h >> np.uint64(63)).astype(np.float64)
        return -s if self.negate else s

    def sign(self, i: int) -> int:
        return int(self.signs(np.array([i]))[0])

    def flipped(self) -> "RademacherSequence":
        return RademacherSequence(self.seed, not self.negate)


@dataclass(frozen=True)
class TruncationPolicy:
    """Where infinite profiles are cut, and how large a tail bound is tolerated."""

    max_index: int = 2**20
    tail_bound_budget: float = math.inf

    def __post_init__(self):
        if self.max_index < 1:
            raise DomainError("max_index must be positive")
        if self.tail_bound_budget < 0:
            raise DomainError("tail_bound_budget must be nonnegative")


@dataclass(frozen=True)
class FourierSM:
    profile: CoefficientProfile
    signs: RademacherSequence = field(default_factory=lambda: RademacherSequence(0))
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)
    T1: float = TWO_PI

    def __post_init__(self):
        if not self.T1 > 0:
            raise DomainError("T1 must be positive")

    @cached_property
    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """Indices used in evaluation and their signed amplitudes s_i / i."""
        idx = self.profile.indices(self.truncation.max_index)
        return idx, self.signs.signs(idx) / idx

    @property
    def truncated(self) -> bool:
        top = self.profile.max_index
        return top is None or top > self.truncation.max_index

    def _omitted_variance(self, per_index: float) -> float:
        # sum over omitted i of per_index / i**2, bounded by per_index / M
        if not self.truncated:
            return 0.0
        return per_index / self.truncation.max_index

    def interval_tail_bound(self) -> float:
        return _HOEFFDING * math.sqrt(self._omitted_variance(4.0))

    def path_tail_bound(self) -> float:
        return _HOEFFDING * math.sqrt(self._omitted_variance(1.0))

    def with_signs(self, signs: RademacherSequence) -> "FourierSM":
        return FourierSM(self.profile, signs, self.truncation, self.T1)

    def flipped(self) -> "FourierSM":
        return self.with_signs(self.signs.flipped())

    def values_at(self, times) -> np.ndarray:
        """mu_t at arbitrary times in [0, T1]."""
        times = np.asarray(times, dtype=float)
        _check_times(self, times)
        idx, amp = self.support
        return sine_sum(idx, amp, times)


def _check_times(sm: FourierSM, times: np.ndarray) -> None:
    if times.size and (times.min() < 0 or times.max() > sm.T1 * (1 + 1e-12)):
        raise DomainError(f"times must lie in [0, {sm.T1}]")


def _fft_grid_size(t0: float, dt: float, n: int, n_modes: int) -> int | None:
    period = TWO_PI / dt
    N = round(period)
    if N < 1 or abs(period - N) > 1e-9 * period:
        return None
    if N > 2**24 or N > 8 * max(n, n_modes, 64):
        return None
    return N


def sine_sum_uniform(idx, amp, t0: float, dt: float, n: int) -> np.ndarray:
    """sum_i amp_i sin(i t_k) on t_k = t0 + k dt, k < n.

    Uses an FFT after folding indices modulo N when dt = 2 pi / N.
    """
    idx = np.asarray(idx, dtype=np.int64)
    amp = np.asarray(amp, dtype=float)
    if idx.size == 0:
        return np.zeros(n)
    N = _fft_grid_size(t0, dt, n, idx.size)
    if N is None:
        return sine_sum(idx, amp, t0 + dt * np.arange(n))
    w = amp * np.exp(1j * (idx * t0)) if t0 != 0.0 else amp.astype(complex)
    folded = np.bincount(idx % N, weights=w.real, minlength=N) + 1j * np.bincount(
        idx % N, weights=w.imag, minlength=N
    )
    cycle = (np.fft.ifft(folded) * N).imag
    return cycle[np.arange(n) % N]


def sine_sum(idx, amp, times) -> np.ndarray:
    """sum_i amp_i sin(i t) at each time, by direct chunked evaluation."""
    idx = np.asarray(idx, dtype=np.int64)
    times = np.asarray(times, dtype=float)
    out = np.zeros(times.shape)
    if idx.size == 0:
        return out
    flat = times.ravel()
    res = out.ravel()
    rows = max(1, 2**22 // idx.size)
    fidx = idx.astype(float)
    for s in range(0, flat.size, rows):
        res[s : s + rows] = np.sin(np.outer(flat[s : s + rows], fidx)) @ amp
    return res.reshape(times.shape)


@dataclass(frozen=True, eq=False)
class SampledPath:
    """Values on the uniform grid t_k = t0 + k dt; linear between nodes."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise DomainError("a path needs at least two values")
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if not np.all(np.isfinite(vals)):
            raise DomainError("path values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, func, t_end: float, n_points: int, t0: float = 0.0):
        dt = (t_end - t0) / (n_points - 1)
        t = t0 + dt * np.arange(n_points)
        return cls(t0, dt, np.broadcast_to(np.asarray(func(t), dtype=float), t.shape))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.values.size - 1)

    def __len__(self):
        return self.values.size

    def covers(self, a: float, b: float) -> bool:
        slack = 1e-9 * max(self.dt, abs(self.t_end))
        return self.t0 - slack <= a and b <= self.t_end + slack

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if t.size and not self.covers(t.min(), t.max()):
            raise DomainError(
                f"times outside the path domain [{self.t0}, {self.t_end}]"
            )
        return np.interp(t, self.times, self.values)

    def with_values(self, values) -> "SampledPath":
        return SampledPath(self.t0, self.dt, values)

    def to_csv(self, fname) -> None:
        np.savetxt(
            fname,
            np.column_stack([self.times, self.values]),
            delimiter=",",
            header="t,value",
            comments="",
            fmt="%.17g",
        )

    @classmethod
    def from_csv(cls, fname) -> "SampledPath":
        # '#' lines (a run header) and the column names are skipped
        with open(fname) as fh:
            rows = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
        data = np.loadtxt(rows[1:], delimiter=",", ndmin=2)
        t = data[:, 0]
        return cls(t[0], (t[-1] - t[0]) / (t.size - 1), data[:, 1])


def measure_of_interval(sm: FourierSM, a: float, b: float) -> tuple[float, float]:
    """mu((a, b]) and a tail bound for the omitted coefficients."""
    if a > b:
        raise DomainError(f"interval ({a}, {b}] is reversed")
    if a < 0 or b > sm.T1 * (1 + 1e-12):
        raise DomainError(f"interval ({a}, {b}] leaves [0, {sm.T1}]")
    idx, amp = sm.support
    fidx = idx.astype(float)
    value = math.fsum(amp * (np.sin(fidx * b) - np.sin(fidx * a)))
    tail = sm.interval_tail_bound()
    _check_budget(sm, tail)
    return value, tail


def _check_budget(sm: FourierSM, tail: float) -> None:
    if tail > sm.truncation.tail_bound_budget:
        raise DomainError(
            f"tail bound {tail:.3g} exceeds budget {sm.truncation.tail_bound_budget:.3g};"
            " raise max_index"
        )


def sample_path(
    sm: FourierSM, n_points: int, t_end: float | None = None, t0: float = 0.0
) -> SampledPath:
    """mu_t on a uniform grid of ``n_points`` nodes over [t0, t_end]."""
    if n_points < 2:
        raise DomainError("the grid needs at least two points")
    t_end = sm.T1 if t_end is None else t_end
    if not (0 <= t0 < t_end <= sm.T1 * (1 + 1e-12)):
        raise DomainError(f"grid [{t0}, {t_end}] must lie inside [0, {sm.T1}]")
    _check_budget(sm, sm.path_tail_bound())
    dt = (t_end - t0) / (n_points - 1)
    idx, amp = sm.support
    values = sine_sum_uniform(idx, amp, t0, dt, n_points)
    if t0 == 0.0:
        values[0] = 0.0
    return SampledPath(t0, dt, values)


@dataclass(frozen=True)
class HolderFit:
    gamma_hat: float
    scale_table: list


def holder_diagnostic(path: SampledPath, levels: int) -> HolderFit:
    """Log-log slope of the largest increment against dyadic lag.

    Lag at level l is 2**-l times the path span.  Returns ``nan`` when every
    increment vanishes.
    """
    if levels < 1:
        raise DomainError("levels must be positive")
    if len(path) < 2**levels + 1:
        raise DomainError(
            f"{len(path)} points cannot resolve {levels} dyadic levels"
        )
    span = path.t_end - path.t0
    t = path.times
    v = path.values
    table = []
    for level in range(1, levels + 1):
        lag = span / 2**level
        steps = (len(path) - 1) / 2**level
        if steps == int(steps):
            s = int(steps)
            inc = np.abs(v[s:] - v[:-s])
        else:
            base = t[t + lag <= path.t_end]
            inc = np.abs(path(base + lag) - path(base))
        table.append((level, float(inc.max())))
    scales = np.array([span / 2**lv for lv, _ in table])
    peaks = np.array([m for _, m in table])
    ok = peaks > 0
    if ok.sum() < 2:
        return HolderFit(math.nan, table)
    slope = np.polyfit(np.log(scales[ok]), np.log(peaks[ok]), 1)[0]
    return HolderFit(float(slope), table)
