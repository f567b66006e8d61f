"""Regime classification and closed-form small-value rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from enum import Enum

from .distributions import ImmigrationSpec, OffspringSpec, extinction_root, harris_sevastyanov


class Variant(str, Enum):
    CURLY_W = "curlyW"  # immigration, Z_0 = Y_0
    TILDE_W = "tildeW"  # immigration, single ancestor
    W_ONLY = "W_only"


class Regime(str, Enum):
    CASE_A = "A"
    CASE_B = "B"
    CASE_C = "C"
    CASE_D = "D"
    W_POWER = "W-power"
    W_STRETCHED = "W-stretched"
    TILDE_A = "tilde-A"
    TILDE_B = "tilde-B"
    TILDE_C = "tilde-C"
    TILDE_D = "tilde-D"
    DEGENERATE = "Degenerate"
    UNCLASSIFIED = "Unclassified"

    @property
    def model(self) -> str | None:
        """Shape of the left tail: ``power``, ``logsq`` or ``stretched``."""
        return _MODEL.get(self)


_MODEL = {
    Regime.CASE_A: "power",
    Regime.CASE_D: "power",
    Regime.W_POWER: "power",
    Regime.TILDE_A: "power",
    Regime.TILDE_D: "power",
    Regime.CASE_B: "logsq",
    Regime.TILDE_B: "logsq",
    Regime.CASE_C: "stretched",
    Regime.W_STRETCHED: "stretched",
    Regime.TILDE_C: "stretched",
}


class RegimeMismatchError(ValueError):
    pass


class UnclassifiedError(ValueError):
    pass


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    variant: Variant
    rho: float = 0.0
    power_exponent: float | None = None
    logsq_coefficient: float | None = None
    beta: float | None = None
    stretched_exponent: float | None = None
    h_rho: float | None = None
    tau: float | None = None
    # exact form of the headline rate: (formula, numerator, denominator)
    formula: str = ""
    numerator: float | None = None
    denominator: float | None = None
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def model(self) -> str | None:
        return self.regime.model

    @property
    def rate(self) -> float | None:
        """The headline tail rate for the regime's model."""
        return {
            "power": self.power_exponent,
            "logsq": self.logsq_coefficient,
            "stretched": self.stretched_exponent,
        }.get(self.model)

    def to_text(self) -> str:
        """Flat ``key = value`` block."""
        lines = [f"case = {self.regime.value}", f"variant = {self.variant.value}"]
        for f in fields(self):
            if f.name in ("regime", "variant", "warnings"):
                continue
            value = getattr(self, f.name)
            if value is None or value == "":
                continue
            lines.append(f"{f.name} = {value:.17g}" if isinstance(value, float) else f"{f.name} = {value}")
        for w in self.warnings:
            lines.append(f"warning = {w}")
        return "\n".join(lines) + "\n"


def _power(regime, variant, num, den, formula, **kw) -> RegimeReport:
    return RegimeReport(
        regime, variant, power_exponent=num / den, formula=formula, numerator=num, denominator=den, **kw
    )


def _stretched(regime, variant, off, **kw) -> RegimeReport:
    num, den = math.log(off.gamma), math.log(off.m)
    beta = num / den
    if not 0.0 < beta < 1.0:
        raise UnclassifiedError(f"beta = {beta} outside (0, 1)")
    return RegimeReport(
        regime,
        variant,
        beta=beta,
        stretched_exponent=beta / (1.0 - beta),
        formula="log(gamma)/log(m)",
        numerator=num,
        denominator=den,
        **kw,
    )


def _classify_w(off: OffspringSpec, variant: Variant, warnings) -> RegimeReport:
    log_m = math.log(off.m)
    if off.p0 > 0.0:
        # W has an atom rho at 0; the rate describes P(0 < W <= eps)
        hs = harris_sevastyanov(off)
        warnings = warnings + (f"W has an atom of mass rho = {hs.rho:.6g} at 0",)
        return _power(
            Regime.W_POWER,
            variant,
            abs(math.log(hs.p1_tilde)),
            log_m,
            "|log f'(rho)|/log(m)",
            rho=hs.rho,
            tau=hs.tau,
            warnings=warnings,
        )
    if off.p1 > 0.0:
        return _power(Regime.W_POWER, variant, abs(math.log(off.p1)), log_m, "|log p1|/log(m)", warnings=warnings)
    return _stretched(Regime.W_STRETCHED, variant, off, warnings=warnings)


def classify(
    off: OffspringSpec,
    imm: ImmigrationSpec | None = None,
    variant: Variant | str = Variant.CURLY_W,
) -> RegimeReport:
    """Decide which small-value regime applies and compute its predicted rate."""
    variant = Variant(variant)
    off.require_supercritical()
    warnings: tuple[str, ...] = ()
    if off.is_deterministic:
        # predictions are never extrapolated to non-branching laws
        return RegimeReport(
            Regime.UNCLASSIFIED,
            variant,
            warnings=("deterministic offspring law; rates not predicted",),
        )
    if variant is Variant.W_ONLY:
        return _classify_w(off, variant, warnings)
    if imm is None:
        raise ValueError(f"variant {variant.value} needs an immigration law")
    if imm.q0 == 1.0:
        if variant is Variant.CURLY_W:
            return RegimeReport(Regime.DEGENERATE, variant, warnings=("q0 = 1: immigration limit is identically 0",))
        # no immigration: the single-ancestor process is plain GW
        return _classify_w(off, Variant.W_ONLY, ("q0 = 1: reduces to the limit without immigration",))

    log_m = math.log(off.m)
    tilde = variant is Variant.TILDE_W
    if off.p0 > 0.0:
        rho = extinction_root(off)
        h_rho = imm.h(rho)
        return _power(
            Regime.TILDE_D if tilde else Regime.CASE_D,
            variant,
            abs(math.log(h_rho)),
            log_m,
            "|log h(rho)|/log(m)",
            rho=rho,
            h_rho=h_rho,
            tau=harris_sevastyanov(off).tau,
        )
    if tilde:
        if off.p1 > 0.0 and imm.q0 > 0.0:
            num = abs(math.log(off.p1)) + abs(math.log(imm.q0))
            return _power(Regime.TILDE_A, variant, num, log_m, "|log(p1 q0)|/log(m)")
        if off.p1 > 0.0 and imm.q0 == 0.0:
            return _logsq(Regime.TILDE_B, variant, off, imm)
        return _stretched(Regime.TILDE_C, variant, off)
    if imm.q0 > 0.0:
        return _power(Regime.CASE_A, variant, abs(math.log(imm.q0)), log_m, "|log q0|/log(m)")
    if off.p1 > 0.0:
        return _logsq(Regime.CASE_B, variant, off, imm)
    return _stretched(Regime.CASE_C, variant, off)


def _logsq(regime, variant, off, imm) -> RegimeReport:
    num = imm.K * abs(math.log(off.p1))
    den = 2.0 * math.log(off.m) ** 2
    return RegimeReport(
        regime,
        variant,
        logsq_coefficient=num / den,
        formula="K|log p1|/(2 log(m)^2)",
        numerator=num,
        denominator=den,
    )


@dataclass(frozen=True)
class MinimalTree:
    n: int
    b_n: int
    B_n: int
    prob: float


def minimal_counts(gamma: int, K: int, n: int) -> tuple[int, int]:
    """``(b(n), B(n))``: smallest generation-n size and the sum of the earlier ones."""
    g1 = gamma - 1
    b = K * (gamma ** (n + 1) - 1) // g1
    B = K * (gamma ** (n + 1) - (n + 1) * gamma + n) // (g1 * g1)
    return b, B


def minimal_tree(off: OffspringSpec, imm: ImmigrationSpec, n: int) -> MinimalTree:
    if n < 0:
        raise ValueError("n must be >= 0")
    if off.p0 != 0.0 or imm.q0 != 0.0 or off.gamma < 2:
        raise RegimeMismatchError("minimal tree needs p0 = 0, q0 = 0 and gamma >= 2")
    b, B = minimal_counts(off.gamma, imm.K, n)
    prob = off.pmf.mass(off.gamma) ** B * imm.pmf.mass(imm.K) ** (n + 1)
    return MinimalTree(n, b, B, prob)


def cutoff_index(epsilon: float, m: float, gamma: int | None = None) -> int:
    """Integer ``k`` with ``r^k <= eps < r^(k-1)``, ``r = 1/m`` (or ``gamma/m``)."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if not m > 1.0:
        raise ValueError("m must exceed 1")
    if gamma is None:
        base = m
    else:
        if not m > gamma:
            raise RegimeMismatchError(f"gamma mode needs m > gamma, got m={m}, gamma={gamma}")
        base = m / gamma
    k = math.ceil(abs(math.log(epsilon)) / math.log(base))
    # repair float rounding so the sandwich holds for the computed powers
    while base ** (-k) > epsilon:
        k += 1
    while k > 1 and base ** (-(k - 1)) <= epsilon:
        k -= 1
    return k


def truncation_level(imm: ImmigrationSpec, delta: float) -> int:
    """Smallest ``l >= 0`` with ``sum_{i > l} P(log+ Y >= delta i) <= 1/2``."""
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    if imm.pmf.is_parametric:
        raise ValueError("truncation_level needs a finite-support immigration law")
    logs = [(math.log(k) if k > 1 else 0.0, p) for k, p in imm.pmf.masses.items()]
    top = max(lg for lg, _ in logs)
    terms = []
    i = 1
    while delta * i <= top:
        terms.append(math.fsum(p for lg, p in logs if lg >= delta * i))
        i += 1
    # tail[l] = sum of terms with index > l
    tail = 0.0
    level = len(terms)
    for l in range(len(terms) - 1, -1, -1):
        tail += terms[l]
        if tail > 0.5:
            break
        level = l
    return level
