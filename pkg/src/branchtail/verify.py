"""Named verification checks shared by the CLI ``verify`` pipeline and the
acceptance suite. Each check returns a list of :class:`Check` rows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import laplace as lt
from .asymptotics import Variant, classify, minimal_counts, minimal_tree
from .distributions import ImmigrationSpec, OffspringSpec, Pmf, harris_sevastyanov, parse_literal
from .estimate import exact_dist_dp, fit_tail, ks_distance, ks_to_cdf, mc_tail
from .simulate import (
    SimConfig,
    sample_curlyW_decomposition,
    sample_gwi,
    sample_hs_product,
    sample_tildeW,
    sample_W,
)


@dataclass(frozen=True)
class Check:
    name: str
    predicted: float
    observed: float
    tolerance: float
    passed: bool
    kind: str = "rel"  # rel | abs | max

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}  {self.name}: observed={self.observed:.17g} "
            f"predicted={self.predicted:.17g} tolerance={self.tolerance:g} ({self.kind})"
        )


def rel_check(name, predicted, observed, tol) -> Check:
    ok = abs(observed - predicted) <= tol * abs(predicted)
    return Check(name, predicted, observed, tol, bool(ok), "rel")


def abs_check(name, predicted, observed, tol) -> Check:
    return Check(name, predicted, observed, tol, bool(abs(observed - predicted) <= tol), "abs")


def max_check(name, observed, bound) -> Check:
    """``observed < bound``."""
    return Check(name, bound, observed, bound, bool(observed < bound), "max")


def draw_limits(off, imm, variant, cfg) -> np.ndarray:
    variant = Variant(variant)
    if variant is Variant.W_ONLY:
        return sample_W(off, cfg)
    mode = "single_ancestor" if variant is Variant.TILDE_W else "immigrant_start"
    return sample_gwi(off, imm, cfg, mode)


def tail_rate(off, imm, variant, cfg, epsilons, tol, name="tail rate"):
    """Monte Carlo tail fit against the predicted rate; returns ``(checks, curve)``."""
    report = classify(off, imm, variant)
    samples = draw_limits(off, imm, variant, cfg)
    curve = mc_tail(samples, epsilons, seed=cfg.master_seed)
    fitted, _ = fit_tail(curve, report)
    return [rel_check(name, report.rate, fitted, tol)], curve


def laplace_rate(off, imm, variant, lambdas, tol, name="laplace rate"):
    """Transform-side fit against the regime's predicted transform rate."""
    report = classify(off, imm, variant)
    model, predicted = lt.predicted_lt_rate(report)
    curve = lt.laplace_curve(off, imm, lambdas, Variant(variant).value)
    coef, exponent, _ = lt.fit_lt_rate(curve, model)
    observed = coef if model == "logsq" else exponent
    # stretched fits compare beta; power fits compare the (negative) slope
    return [rel_check(name, predicted, observed, tol)], curve


def exp_oracle(cfg, epsilons, tol_ks=0.02, tol_rate=0.10):
    """W ~ Exp(1) for fractional-linear offspring: KS distance and tail slope."""
    off = OffspringSpec(Pmf.fractional_linear(2.0))
    w = sample_W(off, cfg)
    ks = ks_to_cdf(w, lambda x: -np.expm1(-x))
    report = classify(off, None, Variant.W_ONLY)
    fitted, _ = fit_tail(mc_tail(w, epsilons), report)
    return [
        max_check("KS(W, Exp(1))", ks, tol_ks),
        rel_check("tail slope vs |log p1|/log m", report.power_exponent, fitted, tol_rate),
    ]


def atom_frequency(off, cfg, tol=0.01):
    """Fraction of exact zeros among W draws against the extinction probability."""
    hs = harris_sevastyanov(off)
    w = sample_W(off, cfg)
    return [abs_check("P(W = 0) vs rho", hs.rho, float(np.mean(w == 0.0)), tol)]


def random_case_c(rng: np.random.Generator):
    """Random finite laws with p0 = q0 = 0 and gamma >= 2."""
    gamma = int(rng.integers(2, 4))
    ks = sorted(set([gamma] + list(rng.integers(gamma, gamma + 3, size=2))))
    w = rng.random(len(ks)) + 0.05
    off = OffspringSpec(Pmf.finite(dict(zip(ks, w / w.sum()))))
    K = int(rng.integers(1, 3))
    ys = sorted(set([K] + list(rng.integers(K, K + 3, size=2))))
    v = rng.random(len(ys)) + 0.05
    imm = ImmigrationSpec(Pmf.finite(dict(zip(ys, v / v.sum()))))
    return off, imm


def minimal_tree_oracle(configs=50, max_n=3, seed=0, tol=1e-12, recurrence_n=30):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(configs):
        off, imm = random_case_c(rng)
        for n in range(max_n + 1):
            t = minimal_tree(off, imm, n)
            d = exact_dist_dp(off, imm, n, cap=t.b_n + 1)
            worst = max(worst, abs(d.masses.get(t.b_n, 0.0) - t.prob))
    bad = 0
    for gamma in (2, 3, 4, 5):
        for K in (1, 2, 3):
            b_prev, B_prev = minimal_counts(gamma, K, 0)
            if (b_prev, B_prev) != (K, 0):
                bad += 1
            for n in range(1, recurrence_n + 1):
                b, B = minimal_counts(gamma, K, n)
                if b != gamma * b_prev + K or B != B_prev + b_prev:
                    bad += 1
                b_prev, B_prev = b, B
    return [
        Check("max |P_DP(Z_n = b(n)) - p_g^B q_K^(n+1)|", 0.0, worst, tol, worst <= tol, "abs"),
        Check("b/B recurrence violations (n <= 30)", 0.0, float(bad), 0.0, bad == 0, "abs"),
    ]


def identities(off, imm, hs_off, cfg, tol=0.02):
    """KS distances for the three equal-in-distribution pairs."""
    seed = cfg.master_seed
    other = SimConfig(cfg.generations, cfg.replicates, (seed + 1) % 2**64, cfg.population_cap, cfg.workers)
    direct = sample_gwi(off, imm, cfg, "immigrant_start")
    decomp = sample_curlyW_decomposition(off, imm, other)
    single = sample_gwi(off, imm, cfg, "single_ancestor")
    tilde = sample_tildeW(off, imm, other)
    w = sample_W(hs_off, cfg)
    prod = sample_hs_product(harris_sevastyanov(hs_off), other)
    return [
        max_check("KS(decomposition, direct)", ks_distance(decomp, direct), tol),
        max_check("KS(W + W'/m, single ancestor)", ks_distance(tilde, single), tol),
        max_check("KS(W, W0 * W~)", ks_distance(w, prod), tol),
    ]


FUNCTIONAL_PANEL = ("{1:0.5, 2:0.5}", "{2:0.5, 3:0.5}", "fl(m=2)", "{0:0.25, 2:0.75}", "{1:0.2, 4:0.8}")


def functional(points=41, residual_tol=1e-10, refine_tol=0.01, panel=FUNCTIONAL_PANEL):
    """Functional-equation residual, power-bound stability, Tauberian round trip, exponent additivity."""
    worst = 0.0
    for lit in panel:
        off = OffspringSpec(parse_literal(lit))
        for lam in lt.log_grid(1e-3, 1e12, points):
            worst = max(worst, lt.functional_residual(off, lam))
    checks = [max_check("max functional-equation residual", worst, residual_tol)]

    drift = 0.0
    for lit in panel:
        off = OffspringSpec(parse_literal(lit))
        if off.p0 > 0 or off.p1 == 0:
            continue
        coarse = lt.power_bound_sup(off, lt.log_grid(1.0, 1e12, points))
        fine = lt.power_bound_sup(off, lt.log_grid(1.0, 1e12, 2 * points - 1))
        drift = max(drift, abs(fine - coarse) / max(abs(coarse), 1.0))
    checks.append(max_check("power-bound sup drift under grid refinement", drift, refine_tol))

    trip = 0.0
    for alpha, theta in [(0.5, 0.0), (1.0, 0.0), (3.1, -1.5), (0.0, 2.0), (7.0, 4.0), (0.25, 0.3)]:
        r = lt.tauberian_convert(alpha, theta)
        back = lt.tauberian_invert(r.lt_alpha, r.lt_theta)
        trip = max(trip, abs(back.alpha - alpha), abs(back.theta - theta))
    checks.append(Check("Tauberian round-trip error", 0.0, trip, 1e-12, trip <= 1e-12, "abs"))

    add = 0.0
    for o_lit, q_lit in [("{1:0.5, 2:0.5}", "{0:0.5, 1:0.5}"), ("{1:0.3, 3:0.7}", "{0:0.2, 2:0.8}")]:
        off, imm = OffspringSpec(parse_literal(o_lit)), ImmigrationSpec(parse_literal(q_lit))
        a = classify(off, imm, Variant.TILDE_W).power_exponent
        b = classify(off, None, Variant.W_ONLY).power_exponent
        c = classify(off, imm, Variant.CURLY_W).power_exponent
        add = max(add, abs(a - (b + c)))
    checks.append(Check("single-ancestor exponent additivity", 0.0, add, 1e-12, add <= 1e-12, "abs"))
    return checks


__all__ = [
    "Check",
    "atom_frequency",
    "exp_oracle",
    "functional",
    "identities",
    "laplace_rate",
    "minimal_tree_oracle",
    "tail_rate",
]

