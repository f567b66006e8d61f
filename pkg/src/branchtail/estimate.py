"""Monte Carlo left-tail estimation, rate regression, KS distance and an exact
small-horizon distribution used as a brute-force oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import beta as beta_dist

from .asymptotics import Regime, RegimeReport, Variant
from .distributions import ImmigrationSpec, OffspringSpec


class InsufficientDataError(ValueError):
    pass


@dataclass
class TailCurve:
    epsilons: np.ndarray
    probs: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    counts: np.ndarray
    replicates: int
    seed: int | None = None

    def to_csv(self, path, header: dict | None = None) -> None:
        with open(path, "w") as fh:
            for key, value in (header or {}).items():
                fh.write(f"# {key} = {value}\n")
            fh.write("epsilon,prob,ci_low,ci_high,replicates,seed\n")
            seed = "" if self.seed is None else self.seed
            for row in zip(self.epsilons, self.probs, self.ci_low, self.ci_high):
                fh.write(",".join(f"{v:.17g}" for v in row) + f",{self.replicates},{seed}\n")


def clopper_pearson(k, n: int, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    """Exact binomial interval for ``k`` successes in ``n`` trials."""
    k = np.asarray(k)
    a = (1.0 - level) / 2.0
    lo = np.where(k > 0, beta_dist.ppf(a, np.maximum(k, 1), n - k + 1), 0.0)
    hi = np.where(k < n, beta_dist.ppf(1.0 - a, k + 1, np.maximum(n - k, 1)), 1.0)
    return lo, hi


def mc_tail(samples, epsilons, seed: int | None = None) -> TailCurve:
    """Empirical ``P(V <= eps)`` on a grid, with 95% Clopper-Pearson intervals."""
    eps = np.asarray(epsilons, dtype=float)
    if eps.size == 0:
        raise ValueError("empty epsilon grid")
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("no samples")
    order = np.argsort(-eps, kind="stable")
    eps = eps[order]
    counts = np.searchsorted(x, eps, side="right")
    n = x.size
    lo, hi = clopper_pearson(counts, n)
    return TailCurve(eps, counts / n, lo, hi, counts, n, seed)


def _fit_xy(model: str, eps: np.ndarray, probs: np.ndarray):
    pos = probs > 0
    eps, logp = eps[pos], np.log(probs[pos])
    if model == "power":
        return np.log(eps), logp
    if model == "logsq":
        return np.abs(np.log(eps)), logp
    if model == "stretched":
        keep = logp < 0
        return np.log(eps[keep]), np.log(-logp[keep])
    raise ValueError(f"unknown model {model!r}")


def fit_model(model: str, eps, probs) -> tuple[float, float]:
    """Rate and r^2 for one of the three tail shapes.

    power: slope of log P vs log eps. logsq: ``c`` in
    ``log P = -c |log eps|^2 + b |log eps| + a``. stretched: negated slope of
    ``log(-log P)`` vs log eps.
    """
    x, y = _fit_xy(model, np.asarray(eps, float), np.asarray(probs, float))
    if x.size < 3:
        raise InsufficientDataError("need at least 3 usable points")
    deg = 2 if model == "logsq" else 1
    coef = np.polyfit(x, y, deg)
    resid = y - np.polyval(coef, x)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = float(1.0 - np.sum(resid**2) / ss) if ss > 0 else 1.0
    if model == "power":
        rate = coef[0]
    elif model == "logsq":
        rate = -coef[0]
    else:
        rate = -coef[0]
    return float(rate), r2


def fit_tail(curve: TailCurve, regime: RegimeReport, min_points: int = 5) -> tuple[float, float]:
    """Fit the regime's tail model to a Monte Carlo curve: ``(fitted_rate, r2)``.

    Points with zero estimate are dropped; low-epsilon endpoints whose CI spans
    more than half a decade-drop of the fitted curve are trimmed.
    """
    if regime.regime in (Regime.DEGENERATE, Regime.UNCLASSIFIED):
        raise ValueError(f"cannot fit regime {regime.regime.value}")
    if regime.variant is Variant.W_ONLY and regime.rho > 0.0:
        raise ValueError("W has an atom at 0; only the atom frequency is checked")
    model = regime.model
    keep = curve.probs > 0
    eps, probs = curve.epsilons[keep], curve.probs[keep]
    lo, hi = curve.ci_low[keep], curve.ci_high[keep]
    if eps.size < min_points:
        raise InsufficientDataError(f"only {eps.size} grid points with positive estimate")
    order = np.argsort(eps)
    eps, probs, lo, hi = eps[order], probs[order], lo[order], hi[order]
    rate, r2 = fit_model(model, eps, probs)
    if model == "power":
        while eps.size > min_points and lo[0] > 0:
            if np.log10(hi[0] / lo[0]) <= 0.5 * abs(rate):
                break
            eps, probs, lo, hi = eps[1:], probs[1:], lo[1:], hi[1:]
            rate, r2 = fit_model(model, eps, probs)
    return rate, r2


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F_a - F_b|``."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_to_cdf(samples, cdf) -> float:
    """One-sample KS distance to a continuous CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


# -- exact distribution of the immigration process at small horizons ---------


@dataclass
class ExactDist:
    horizon: int
    masses: dict[int, float]
    spill: float


def _pmf_array(pmf, cap: int) -> tuple[np.ndarray, float]:
    arr = np.zeros(cap + 1)
    for k, p in pmf.masses.items():
        if k <= cap:
            arr[k] += p
    return arr, 1.0 - arr.sum()


def _truncate(dist: np.ndarray, cap: int) -> tuple[np.ndarray, float]:
    return dist[: cap + 1], float(dist[cap + 1 :].sum())


def exact_dist_dp(off: OffspringSpec, imm: ImmigrationSpec, n: int, cap: int) -> ExactDist:
    """Exact law of the immigrant-started process at generation ``n``.

    Sums of ``z`` offspring draws come from repeated convolution; everything
    above ``cap`` is accumulated in ``spill``.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if off.pmf.is_parametric or imm.pmf.is_parametric:
        raise ValueError("exact DP needs finite-support laws")
    # minimal attainable size must fit below the cap
    smallest = imm.K
    for _ in range(n):
        smallest = off.gamma * smallest + imm.K
    if smallest > cap:
        raise ValueError(f"cap {cap} below the minimal population {smallest}")
    p_off, _ = _pmf_array(off.pmf, cap)
    q_imm, spill = _pmf_array(imm.pmf, cap)
    dist = q_imm
    for _ in range(n):
        nxt = np.zeros(cap + 1)
        power = np.zeros(cap + 1)
        power[0] = 1.0  # law of a sum of zero offspring
        top = int(np.flatnonzero(dist)[-1]) if dist.any() else 0
        for z in range(top + 1):
            if z > 0:
                power, _ = _truncate(np.convolve(power, p_off), cap)
            if dist[z] > 0.0:
                nxt += dist[z] * power
        # mass lost to truncation is whatever did not land in [0, cap]
        live = dist.sum()
        nxt, _ = _truncate(np.convolve(nxt, q_imm), cap)
        spill += live - nxt.sum()
        dist = nxt
    masses = {int(k): float(p) for k, p in enumerate(dist) if p > 0.0}
    return ExactDist(n, masses, float(spill))
