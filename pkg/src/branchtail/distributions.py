"""Offspring and immigration laws, generating functions, extinction root and
the Harris-Sevastyanov transform.

Two representations are supported: finite-support pmfs and the
fractional-linear family ``p_k = (1/m) ((m-1)/m)^(k-1)`` for ``k >= 1``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

SUM_TOL = 1e-12
PRUNE_TOL = 1e-15


class DistributionError(ValueError):
    """Invalid or unsupported distribution."""


class NotSupercriticalError(DistributionError):
    pass


class LiteralParseError(DistributionError):
    """Malformed distribution literal; ``column`` is 1-based."""

    def __init__(self, message: str, column: int):
        super().__init__(f"{message} (column {column})")
        self.column = column


@dataclass(frozen=True)
class Pmf:
    """Probability mass function on the nonnegative integers.

    Either ``masses`` (finite support) or ``fl_mean`` (fractional-linear
    family with mean ``fl_mean``) is set, never both.
    """

    masses: Mapping[int, float] = field(default_factory=dict)
    fl_mean: float | None = None

    def __post_init__(self):
        if self.fl_mean is not None:
            if self.masses:
                raise DistributionError("parametric pmf cannot carry explicit masses")
            if not self.fl_mean > 1.0 or not math.isfinite(self.fl_mean):
                raise DistributionError(f"fractional_linear requires m > 1, got {self.fl_mean}")
            object.__setattr__(self, "masses", MappingProxyType({}))
            return
        if not self.masses:
            raise DistributionError("empty pmf")
        clean = {}
        for k, p in sorted(self.masses.items()):
            if int(k) != k or k < 0:
                raise DistributionError(f"support point {k!r} is not a nonnegative integer")
            p = float(p)
            if not 0.0 <= p <= 1.0:
                raise DistributionError(f"mass {p} at {k} outside [0, 1]")
            if p > 0.0:
                clean[int(k)] = p
        total = math.fsum(clean.values())
        if abs(total - 1.0) > SUM_TOL:
            raise DistributionError(f"masses sum to {total!r}, not 1")
        object.__setattr__(self, "masses", MappingProxyType(clean))

    def __reduce__(self):
        return (type(self), (dict(self.masses), self.fl_mean))

    @classmethod
    def finite(cls, masses: Mapping[int, float]) -> "Pmf":
        return cls(masses=dict(masses))

    @classmethod
    def fractional_linear(cls, m: float) -> "Pmf":
        return cls(fl_mean=float(m))

    @property
    def is_parametric(self) -> bool:
        return self.fl_mean is not None

    @property
    def support(self) -> np.ndarray:
        if self.is_parametric:
            raise DistributionError("fractional_linear has infinite support")
        return np.fromiter(self.masses.keys(), dtype=np.int64)

    @property
    def probs(self) -> np.ndarray:
        if self.is_parametric:
            raise DistributionError("fractional_linear has infinite support")
        return np.fromiter(self.masses.values(), dtype=float)

    @property
    def min_support(self) -> int:
        return 1 if self.is_parametric else min(self.masses)

    @property
    def max_support(self) -> float:
        return math.inf if self.is_parametric else max(self.masses)

    def mass(self, k: int) -> float:
        if self.is_parametric:
            if k < 1:
                return 0.0
            m = self.fl_mean
            return (1.0 / m) * ((m - 1.0) / m) ** (k - 1)
        return self.masses.get(k, 0.0)

    def pgf(self, s: float) -> float:
        return pgf_eval(self, s)

    def log_pgf(self, log_s: float) -> float:
        """``log E s^X`` given ``log s <= 0``, without leaving the log domain."""
        if log_s > 0.0:
            raise DistributionError("log_pgf needs log s <= 0")
        if self.is_parametric:
            m = self.fl_mean
            # log s - log(m - (m-1) s) = log s - log1p(-(m-1) expm1(log s))
            return log_s - math.log1p(-(m - 1.0) * math.expm1(log_s))
        if log_s > -1.0:
            # precise near s = 1: f(s) - 1 = sum p_k (s^k - 1)
            acc = math.fsum(p * math.expm1(k * log_s) for k, p in self.masses.items())
            return math.log1p(acc)
        kmin = self.min_support
        terms = [math.log(p) + (k - kmin) * log_s for k, p in self.masses.items()]
        top = max(terms)
        return kmin * log_s + top + math.log(math.fsum(math.exp(t - top) for t in terms))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Independent draws as int64."""
        if self.is_parametric:
            return rng.geometric(1.0 / self.fl_mean, size=size).astype(np.int64)
        return rng.choice(self.support, size=size, p=self.probs)

    def sample_sum(self, rng: np.random.Generator, counts: np.ndarray) -> np.ndarray:
        """For each entry ``z`` of ``counts``, the sum of ``z`` independent draws.

        Exact in distribution: multinomial allocation over the finite support,
        or ``z + NegBin(z, 1/m)`` for the fractional-linear family.
        """
        counts = np.asarray(counts, dtype=np.int64)
        if self.is_parametric:
            out = counts.copy()
            live = counts > 0
            if live.any():
                out[live] += rng.negative_binomial(counts[live], 1.0 / self.fl_mean)
            return out
        support = self.support
        if len(support) == 1:
            return counts * support[0]
        alloc = rng.multinomial(counts, self.probs)
        return alloc @ support

    def __str__(self) -> str:
        return format_literal(self)


def pgf_eval(pmf: Pmf, s: float) -> float:
    """Generating function ``sum_k p_k s^k`` on ``[0, 1]``."""
    if not 0.0 <= s <= 1.0:
        raise DistributionError(f"pgf argument {s} outside [0, 1]")
    if pmf.is_parametric:
        m = pmf.fl_mean
        return s / (m - (m - 1.0) * s)
    return math.fsum(p * s**k for k, p in pmf.masses.items())


def pgf_derivative(pmf: Pmf, s: float) -> float:
    if pmf.is_parametric:
        m = pmf.fl_mean
        return m / (m - (m - 1.0) * s) ** 2
    return math.fsum(k * p * s ** (k - 1) for k, p in pmf.masses.items() if k > 0)


def moments(pmf: Pmf) -> tuple[float, float]:
    """``(mean, variance)``; variance may be ``inf`` for parametric laws in principle."""
    if pmf.is_parametric:
        m = pmf.fl_mean
        # geometric on {1, 2, ...} with success probability 1/m
        return m, m * (m - 1.0)
    mean = math.fsum(k * p for k, p in pmf.masses.items())
    second = math.fsum(k * k * p for k, p in pmf.masses.items())
    return mean, max(second - mean * mean, 0.0)


@dataclass(frozen=True)
class OffspringSpec:
    pmf: Pmf
    m: float = field(init=False)
    gamma: int = field(init=False)
    p0: float = field(init=False)
    p1: float = field(init=False)
    variance: float = field(init=False)

    def __post_init__(self):
        mean, var = moments(self.pmf)
        object.__setattr__(self, "m", mean)
        object.__setattr__(self, "gamma", self.pmf.min_support)
        object.__setattr__(self, "p0", self.pmf.mass(0))
        object.__setattr__(self, "p1", self.pmf.mass(1))
        object.__setattr__(self, "variance", var)

    def require_supercritical(self) -> None:
        if not self.m > 1.0:
            raise NotSupercriticalError(f"offspring mean m = {self.m:g} <= 1 is not supercritical")

    @property
    def is_deterministic(self) -> bool:
        return not self.pmf.is_parametric and len(self.pmf.masses) == 1

    @property
    def var_W(self) -> float:
        """``Var W = sigma^2 / (m^2 - m)`` (standard result, finite variance)."""
        return self.variance / (self.m * self.m - self.m)

    def f(self, s: float) -> float:
        return pgf_eval(self.pmf, s)

    def __str__(self) -> str:
        return str(self.pmf)


@dataclass(frozen=True)
class ImmigrationSpec:
    pmf: Pmf
    K: int = field(init=False)
    q0: float = field(init=False)
    meanY: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "K", self.pmf.min_support)
        object.__setattr__(self, "q0", self.pmf.mass(0))
        object.__setattr__(self, "meanY", moments(self.pmf)[0])

    def h(self, s: float) -> float:
        return pgf_eval(self.pmf, s)

    def __str__(self) -> str:
        return str(self.pmf)


@dataclass(frozen=True)
class LogMomentReport:
    ok: bool
    m: float
    e_x_log_x: float
    e_log_y: float
    message: str = ""


def _fl_expect(m: float, fn) -> float:
    """``E fn(X)`` for the fractional-linear law, summed until terms vanish."""
    p = 1.0 / m
    q = 1.0 - p
    total, k = 0.0, 1
    while True:
        term = fn(k) * p * q ** (k - 1)
        total += term
        if k > 10 and term < 1e-17 * max(total, 1.0):
            return total
        k += 1


def _expect(pmf: Pmf, fn) -> float:
    if pmf.is_parametric:
        raise DistributionError("closed form needed")
    return math.fsum(p * fn(k) for k, p in pmf.masses.items())


def validate_log_moments(off: OffspringSpec, imm: ImmigrationSpec | None) -> LogMomentReport:
    """Check ``E X log+ X < inf`` and ``E log+ Y < inf``.

    Both always hold for finite-support and fractional-linear laws; the
    values are recorded. Raises ``NotSupercriticalError`` when ``m <= 1``.
    """
    off.require_supercritical()
    pmf, m = off.pmf, off.m
    logp = lambda k: math.log(k) if k > 1 else 0.0
    exlx = _fl_expect(pmf.fl_mean, lambda k: k * logp(k)) if pmf.is_parametric else _expect(pmf, lambda k: k * logp(k))
    ely = 0.0
    if imm is not None:
        ipmf = imm.pmf
        if ipmf.is_parametric:
            ely = _fl_expect(ipmf.fl_mean, logp)
        else:
            ely = _expect(ipmf, logp)
    return LogMomentReport(True, m, exlx, ely)


def extinction_root(off: OffspringSpec, tol: float = 1e-12) -> float:
    """Smallest fixed point of ``f`` in ``[0, 1)`` by bisection.

    ``f(s) - s`` is convex, positive at 0 when ``p0 > 0`` and negative just
    below 1 since ``f'(1) = m > 1``.
    """
    off.require_supercritical()
    if off.p0 == 0.0:
        return 0.0
    g = lambda s: off.f(s) - s
    # locate a point below 1 where g < 0
    hi = 1.0 - 1e-3
    while g(hi) >= 0.0:
        hi = 1.0 - (1.0 - hi) / 2.0
        if 1.0 - hi < 1e-15:
            raise DistributionError("could not bracket the extinction root")
    lo = 0.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16 and abs(g(mid)) <= tol:
            break
    return lo if abs(g(lo)) <= abs(g(hi)) else hi


@dataclass(frozen=True)
class HSTransformResult:
    rho: float
    transformed: OffspringSpec
    p1_tilde: float
    tau: float
    w0_atom: float


def harris_sevastyanov(off: OffspringSpec) -> HSTransformResult:
    """Conjugate ``f`` to ``(f((1-rho) s + rho) - rho) / (1 - rho)``, which has no mass at 0."""
    rho = extinction_root(off)
    if rho == 0.0:
        p1 = off.p1
        tau = abs(math.log(p1)) / math.log(off.m) if p1 > 0 else math.inf
        return HSTransformResult(0.0, off, p1, tau, 1.0)
    if off.pmf.is_parametric:
        raise DistributionError("unsupported representation for Harris-Sevastyanov transform")
    kmax = int(off.pmf.max_support)
    coeffs = {}
    for j in range(1, kmax + 1):
        acc = math.fsum(
            p * math.comb(k, j) * rho ** (k - j) for k, p in off.pmf.masses.items() if k >= j
        )
        c = (1.0 - rho) ** (j - 1) * acc
        if c >= PRUNE_TOL:
            coeffs[j] = c
    total = math.fsum(coeffs.values())
    coeffs = {k: c / total for k, c in coeffs.items()}
    transformed = OffspringSpec(Pmf.finite(coeffs))
    p1_tilde = pgf_derivative(off.pmf, rho)
    tau = abs(math.log(p1_tilde)) / math.log(off.m)
    return HSTransformResult(rho, transformed, p1_tilde, tau, 1.0 / (1.0 - rho))


# -- literal grammar: "{k:mass, k:mass}" or "fl(m=2.0)" ----------------------

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_FL_RE = re.compile(rf"\s*fl\(\s*m\s*=\s*({_NUM})\s*\)\s*$")


def parse_literal(text: str) -> Pmf:
    """Parse a distribution literal. Raises ``LiteralParseError`` with a column."""
    fl = _FL_RE.match(text)
    if fl:
        try:
            return Pmf.fractional_linear(float(fl.group(1)))
        except DistributionError as exc:
            raise LiteralParseError(str(exc), fl.start(1) + 1) from None
    pos = 0
    n = len(text)

    def skip():
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def expect(ch):
        nonlocal pos
        skip()
        if pos >= n or text[pos] != ch:
            got = repr(text[pos]) if pos < n else "end of input"
            raise LiteralParseError(f"expected {ch!r}, got {got}", pos + 1)
        pos += 1

    def number(pattern, what):
        nonlocal pos
        skip()
        mt = re.compile(pattern).match(text, pos)
        if not mt:
            raise LiteralParseError(f"expected {what}", pos + 1)
        pos = mt.end()
        return mt.group(0)

    expect("{")
    masses: dict[int, float] = {}
    while True:
        start = pos
        key = int(number(r"\d+", "integer key"))
        if key in masses:
            raise LiteralParseError(f"duplicate key {key}", start + 1)
        expect(":")
        masses[key] = float(number(_NUM, "decimal mass"))
        skip()
        if pos < n and text[pos] == ",":
            pos += 1
            continue
        expect("}")
        break
    skip()
    if pos != n:
        raise LiteralParseError("trailing characters", pos + 1)
    try:
        return Pmf.finite(masses)
    except DistributionError as exc:
        raise LiteralParseError(str(exc), 1) from None


def format_literal(pmf: Pmf) -> str:
    if pmf.is_parametric:
        return f"fl(m={pmf.fl_mean!r})"
    return "{" + ", ".join(f"{k}:{p!r}" for k, p in pmf.masses.items()) + "}"
