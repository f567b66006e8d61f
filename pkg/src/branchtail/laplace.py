"""Log-domain Laplace transforms of the martingale limits and Tauberian conversions.

``phi(lam) = E exp(-lam W)`` solves ``phi(lam) = f(phi(lam / m))``. It is
computed by starting from a second-order expansion at a small argument and
iterating ``f`` in log space, which stays representable even when ``phi`` is
doubly-exponentially small (``p1 = 0``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import ImmigrationSpec, OffspringSpec

DEFAULT_BASE_LAMBDA = 1e-6
DEFAULT_DEPTH_CAP = 10_000
DEFAULT_PRODUCT_TOL = 1e-15


class DepthExceededError(RuntimeError):
    pass


class DegenerateError(ValueError):
    pass


def _base_log_phi(off: OffspringSpec, lam: float) -> float:
    # phi ~ 1 - lam + E[W^2] lam^2 / 2, with E W = 1
    if math.isfinite(off.variance):
        ew2 = 1.0 + off.var_W
        return math.log1p(-lam + 0.5 * ew2 * lam * lam)
    return math.log1p(-lam)


def log_phi_chain(
    off: OffspringSpec,
    lam: float,
    base_lambda: float = DEFAULT_BASE_LAMBDA,
    depth_cap: int = DEFAULT_DEPTH_CAP,
) -> list[float]:
    """``[log phi(lam/m^n), ..., log phi(lam/m), log phi(lam)]`` with ``lam/m^n <= base_lambda``."""
    if not lam > 0.0:
        raise ValueError("lambda must be positive")
    m = off.m
    n = max(0, math.ceil(math.log(lam / base_lambda) / math.log(m)))
    if n > depth_cap:
        raise DepthExceededError(f"lambda={lam:g} needs {n} iterations > depth_cap={depth_cap}")
    L = _base_log_phi(off, lam / m**n)
    chain = [L]
    for _ in range(n):
        L = off.pmf.log_pgf(L)
        chain.append(L)
    return chain


def phi_W(
    off: OffspringSpec,
    lam: float,
    base_lambda: float = DEFAULT_BASE_LAMBDA,
    depth_cap: int = DEFAULT_DEPTH_CAP,
) -> float:
    """``log E exp(-lam W)``."""
    off.require_supercritical()
    return log_phi_chain(off, lam, base_lambda, depth_cap)[-1]


def _log_h(imm: ImmigrationSpec, log_s: float) -> float:
    return imm.pmf.log_pgf(log_s)


@dataclass
class CurlyResult:
    log_value: float
    depth: int
    terms: int


def phi_curlyW_detail(
    off: OffspringSpec,
    imm: ImmigrationSpec,
    lam: float,
    tol: float = DEFAULT_PRODUCT_TOL,
    base_lambda: float = DEFAULT_BASE_LAMBDA,
    depth_cap: int = DEFAULT_DEPTH_CAP,
) -> CurlyResult:
    off.require_supercritical()
    if imm.q0 == 1.0:
        # W' is identically 0, so the transform is exactly 1
        return CurlyResult(0.0, 0, 0)
    chain = log_phi_chain(off, lam, base_lambda, depth_cap)
    # chain[-1 - i] = log phi(lam m^-i) for i <= n
    logs = []
    i = 0
    while True:
        if i < len(chain):
            L = chain[-1 - i]
        else:
            L = _base_log_phi(off, lam * off.m ** (-i))
        lh = _log_h(imm, L)
        logs.append(lh)
        # 1 - h(phi) < tol  <=>  -expm1(log h) < tol
        if -math.expm1(lh) < tol:
            break
        i += 1
        if i > depth_cap + len(chain):
            raise DepthExceededError("product did not converge")
    return CurlyResult(math.fsum(logs), len(chain) - 1, len(logs))


def phi_curlyW(
    off: OffspringSpec,
    imm: ImmigrationSpec,
    lam: float,
    tol: float = DEFAULT_PRODUCT_TOL,
    base_lambda: float = DEFAULT_BASE_LAMBDA,
) -> float:
    """``log E exp(-lam W')`` for the immigration limit, via the product over generations."""
    return phi_curlyW_detail(off, imm, lam, tol, base_lambda).log_value


def phi_tildeW(off, imm, lam, tol=DEFAULT_PRODUCT_TOL, base_lambda=DEFAULT_BASE_LAMBDA) -> float:
    """Single-ancestor limit: ``log phi(lam) + log Phi(lam/m)``."""
    if imm.q0 == 1.0:
        return phi_W(off, lam, base_lambda)
    return phi_W(off, lam, base_lambda) + phi_curlyW(off, imm, lam / off.m, tol, base_lambda)


@dataclass
class LaplaceCurve:
    lambdas: np.ndarray
    log_values: np.ndarray
    depths: np.ndarray
    terms: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self, path, header: dict | None = None) -> None:
        with open(path, "w") as fh:
            for key, value in (header or {}).items():
                fh.write(f"# {key} = {value}\n")
            fh.write("lambda,log_value,depth,terms\n")
            for lam, lv, d, t in zip(self.lambdas, self.log_values, self.depths, self.terms):
                fh.write(f"{lam:.17g},{lv:.17g},{int(d)},{int(t)}\n")

    @classmethod
    def from_csv(cls, path) -> "LaplaceCurve":
        data = np.genfromtxt(path, delimiter=",", comments="#", names=True)
        return cls(
            np.atleast_1d(data["lambda"]),
            np.atleast_1d(data["log_value"]),
            np.atleast_1d(data["depth"]).astype(int),
            np.atleast_1d(data["terms"]).astype(int),
        )


def log_grid(lo: float, hi: float, points: int) -> np.ndarray:
    if not 0 < lo < hi or points < 2:
        raise ValueError("need 0 < lo < hi and at least two points")
    return np.geomspace(lo, hi, points)


def laplace_curve(
    off: OffspringSpec,
    imm: ImmigrationSpec | None,
    lambdas,
    variant: str = "W_only",
    tol: float = DEFAULT_PRODUCT_TOL,
    base_lambda: float = DEFAULT_BASE_LAMBDA,
) -> LaplaceCurve:
    """Evaluate the transform of the chosen limit on a grid of ``lambda``."""
    lambdas = np.asarray(lambdas, dtype=float)
    vals, depths, terms = [], [], []
    for lam in lambdas:
        if variant == "W_only":
            chain = log_phi_chain(off, lam, base_lambda)
            vals.append(chain[-1])
            depths.append(len(chain) - 1)
            terms.append(1)
        elif variant == "curlyW":
            r = phi_curlyW_detail(off, imm, lam, tol, base_lambda)
            vals.append(r.log_value)
            depths.append(r.depth)
            terms.append(r.terms)
        elif variant == "tildeW":
            vals.append(phi_tildeW(off, imm, lam, tol, base_lambda))
            depths.append(len(log_phi_chain(off, lam, base_lambda)) - 1)
            terms.append(0)
        else:
            raise ValueError(f"unknown variant {variant!r}")
    meta = {
        "offspring": str(off),
        "immigration": str(imm) if imm is not None else "none",
        "variant": variant,
        "base_lambda": base_lambda,
        "tol": tol,
    }
    return LaplaceCurve(lambdas, np.array(vals), np.array(depths), np.array(terms), meta)


def functional_residual(off: OffspringSpec, lam: float, base_lambda: float = DEFAULT_BASE_LAMBDA) -> float:
    """``|log phi(lam) - log f(phi(lam/m))|``, scaled by ``max(1, |log phi(lam)|)``.

    The scaling keeps the residual meaningful once ``log phi`` is so large in
    magnitude that its spacing between doubles exceeds any fixed tolerance.
    """
    lhs = phi_W(off, lam, base_lambda)
    rhs = off.pmf.log_pgf(phi_W(off, lam / off.m, base_lambda))
    return abs(lhs - rhs) / max(1.0, abs(lhs))


# -- Tauberian conversions ---------------------------------------------------


@dataclass(frozen=True)
class TauberianRate:
    """Tail ``log P(V <= t) <= -C t^-alpha |log t|^theta`` and its transform-side pair."""

    alpha: float
    theta: float
    lt_alpha: float
    lt_theta: float


def tauberian_convert(alpha: float, theta: float) -> TauberianRate:
    """Map tail exponents ``(alpha, theta)`` to ``(alpha/(1+alpha), theta/(1+alpha))``."""
    if not ((alpha > 0.0) or (alpha == 0.0 and theta > 0.0)):
        raise ValueError(f"inadmissible exponents alpha={alpha}, theta={theta}")
    return TauberianRate(alpha, theta, alpha / (1.0 + alpha), theta / (1.0 + alpha))


def tauberian_invert(lt_alpha: float, lt_theta: float) -> TauberianRate:
    """Inverse of :func:`tauberian_convert`."""
    if not 0.0 <= lt_alpha < 1.0:
        raise ValueError("lt_alpha must lie in [0, 1)")
    alpha = lt_alpha / (1.0 - lt_alpha)
    return tauberian_convert(alpha, lt_theta * (1.0 + alpha))


def predicted_lt_rate(report) -> tuple[str, float] | None:
    """Transform-side fit model and rate implied by a regime report."""
    model = report.model
    if model == "power":
        return "power", -report.power_exponent
    if model == "logsq":
        # log P ~ -c |log eps|^2 corresponds to log E ~ -c (log lam)^2
        return "logsq", report.logsq_coefficient
    if model == "stretched":
        return "stretched", tauberian_convert(report.stretched_exponent, 0.0).lt_alpha
    return None


def fit_lt_rate(curve: LaplaceCurve, model: str) -> tuple[float, float, float]:
    """Regress the curve on the model. Returns ``(coefficient, exponent, r2)``.

    ``power``: slope of log phi against log lambda (exponent).
    ``logsq``: ``log phi = -c (log lam)^2 + b log lam + a``; coefficient ``c``.
    ``stretched``: slope of ``log(-log phi)`` against log lambda (exponent).
    """
    lam = np.asarray(curve.lambdas, dtype=float)
    y = np.asarray(curve.log_values, dtype=float)
    if np.all(y == 0.0):
        raise DegenerateError("degenerate curve: all log values are 0")
    if len(lam) < 3 or np.log10(lam.max() / lam.min()) < 3.0:
        raise ValueError("curve must span at least three decades")
    x = np.log(lam)
    if model == "power":
        coef = np.polyfit(x, y, 1)
        return float(coef[1]), float(coef[0]), _r2(x, y, coef)
    if model == "logsq":
        coef = np.polyfit(x, y, 2)
        return float(-coef[0]), 2.0, _r2(x, y, coef)
    if model == "stretched":
        if np.any(y >= 0.0):
            raise ValueError("stretched fit needs log values < 0")
        z = np.log(-y)
        coef = np.polyfit(x, z, 1)
        return float(np.exp(coef[1])), float(coef[0]), _r2(x, z, coef)
    raise ValueError(f"unknown model {model!r}")


def _r2(x, y, coef) -> float:
    resid = y - np.polyval(coef, x)
    ss = np.sum((y - y.mean()) ** 2)
    return float(1.0 - np.sum(resid**2) / ss) if ss > 0 else 1.0


def power_bound_sup(off: OffspringSpec, lambdas) -> float:
    """``sup_lambda [log phi(lam) + (|log p1|/log m) log lam]`` over the grid."""
    a = abs(math.log(off.p1)) / math.log(off.m)
    return max(phi_W(off, lam) + a * math.log(lam) for lam in lambdas)
