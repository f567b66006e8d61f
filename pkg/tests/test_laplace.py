import math

import numpy as np
import pytest

from branchtail.distributions import ImmigrationSpec, OffspringSpec, parse_literal
from branchtail.laplace import (
    DegenerateError,
    DepthExceededError,
    LaplaceCurve,
    fit_lt_rate,
    functional_residual,
    laplace_curve,
    log_grid,
    phi_curlyW,
    phi_curlyW_detail,
    phi_tildeW,
    phi_W,
    power_bound_sup,
    tauberian_convert,
    tauberian_invert,
)
from branchtail.simulate import SimConfig, sample_W


def off(lit):
    return OffspringSpec(parse_literal(lit))


def imm(lit):
    return ImmigrationSpec(parse_literal(lit))


PANEL = ["fl(m=2)", "{1:.5,2:.5}", "{2:.5,3:.5}", "{0:.25,2:.75}", "{1:0.2, 2:0.3, 5:0.5}"]


@pytest.mark.parametrize("lam", [1e-3, 0.5, 1.0, 7.0, 1e3, 1e8])
def test_fl_exact(lam):
    assert phi_W(off("fl(m=2)"), lam) == pytest.approx(-math.log1p(lam), abs=1e-6)


def test_fl_at_one():
    assert phi_W(off("fl(m=2)"), 1.0) == pytest.approx(math.log(0.5), abs=1e-6)


def test_deterministic():
    assert phi_W(off("{2:1}"), 1.0) == pytest.approx(-1.0, abs=1e-12)
    assert phi_W(off("{2:1}"), 1e6) == pytest.approx(-1e6, rel=1e-12)


@pytest.mark.parametrize("lit", PANEL)
def test_small_lambda_limit(lit):
    assert abs(phi_W(off(lit), 1e-12)) < 1e-11


def test_extinction_floor():
    # phi(inf) = rho for W with an atom
    assert phi_W(off("{0:.25,2:.75}"), 1e12) == pytest.approx(math.log(1 / 3), abs=1e-9)


def test_depth_cap():
    with pytest.raises(DepthExceededError):
        phi_W(off("{1:.5,2:.5}"), 1e12, depth_cap=5)


def test_curly_product_oracle():
    # fl(m=2), Y = 1: Phi(1) = prod_i 1/(1 + 2^-i)
    direct = -sum(math.log1p(2.0**-i) for i in range(80))
    got = phi_curlyW(off("fl(m=2)"), imm("{1:1}"), 1.0)
    assert got == pytest.approx(direct, abs=1e-9)
    assert math.exp(got) == pytest.approx(0.2097, abs=1e-4)


def test_curly_small_lambda_and_degenerate():
    o = off("{1:.5,2:.5}")
    assert abs(phi_curlyW(o, imm("{1:1}"), 1e-12)) < 1e-10
    for lam in (1e-3, 1.0, 1e9):
        r = phi_curlyW_detail(o, imm("{0:1}"), lam)
        assert r.log_value == 0.0
    curve = laplace_curve(o, imm("{0:1}"), log_grid(1, 1e6, 10), "curlyW")
    with pytest.raises(DegenerateError):
        fit_lt_rate(curve, "logsq")


def test_tildeW_factorisation():
    o, y = off("{1:.5,2:.5}"), imm("{0:.5,1:.5}")
    for lam in (0.3, 10.0, 1e5):
        assert phi_tildeW(o, y, lam) == pytest.approx(phi_W(o, lam) + phi_curlyW(o, y, lam / o.m), rel=1e-14)
    assert phi_tildeW(o, imm("{0:1}"), 3.0) == phi_W(o, 3.0)


@pytest.mark.parametrize("lit", PANEL)
def test_functional_residual(lit):
    o = off(lit)
    for lam in log_grid(1e-2, 1e12, 29):
        assert functional_residual(o, lam) < 1e-10


@pytest.mark.parametrize("lit", PANEL)
def test_monotone_convex(lit):
    o = off(lit)
    lam = np.linspace(0.01, 60.0, 400)
    y = np.array([phi_W(o, x) for x in lam])
    assert np.all(np.diff(y) <= 1e-13)
    assert np.all(np.diff(y, 2) >= -1e-9)
    big = log_grid(1, 1e12, 40)
    assert np.all(np.diff([phi_W(o, x) for x in big]) <= 1e-13)
    # crude bound phi >= 1 - lam E W
    assert y[0] >= -2 * lam[0]


@pytest.mark.parametrize("lit", PANEL)
def test_base_point_halving(lit):
    o = off(lit)
    for lam in log_grid(1e-2, 1e12, 15):
        a, b = phi_W(o, lam, base_lambda=1e-6), phi_W(o, lam, base_lambda=5e-7)
        # measured on the same scale as the residual: float spacing grows with |log phi|
        assert abs(a - b) < 1e-8 * max(1.0, abs(a))


@pytest.mark.parametrize("lit", ["{1:.5,2:.5}", "{1:0.2, 2:0.3, 5:0.5}"])
def test_power_bound_stable(lit):
    o = off(lit)
    coarse = power_bound_sup(o, log_grid(1, 1e12, 49))
    fine = power_bound_sup(o, log_grid(1, 1e12, 97))
    assert math.isfinite(coarse)
    assert abs(fine - coarse) <= 0.01 * max(1.0, abs(coarse))


@pytest.mark.parametrize("lit", ["{1:.5,2:.5}", "{2:.5,3:.5}", "{0:.25,2:.75}"])
def test_matches_simulation(lit):
    o = off(lit)
    depth = int(math.log(1e7) / math.log(o.m))
    w = sample_W(o, SimConfig(generations=depth, replicates=100_000, master_seed=31))
    for lam in (0.5, 1.0, 2.0):
        e = np.exp(-lam * w)
        se = e.std(ddof=1) / math.sqrt(e.size)
        assert abs(e.mean() - math.exp(phi_W(o, lam))) < 3 * se + 1e-4


def test_tauberian_examples():
    beta = 0.75647
    r = tauberian_convert(beta / (1 - beta), 0.0)
    assert r.lt_alpha == pytest.approx(beta, abs=1e-12) and r.lt_theta == 0.0
    r = tauberian_convert(0.0, 2.0)
    assert (r.lt_alpha, r.lt_theta) == (0.0, 2.0)
    r = tauberian_convert(1.0, 0.0)
    assert (r.lt_alpha, r.lt_theta) == (0.5, 0.0)
    for bad in [(0.0, 0.0), (0.0, -1.0), (-0.5, 1.0)]:
        with pytest.raises(ValueError):
            tauberian_convert(*bad)


@pytest.mark.parametrize("alpha, theta", [(0.3, -1.0), (3.1063, 0.0), (0.0, 2.0), (12.0, 5.0)])
def test_tauberian_roundtrip(alpha, theta):
    fwd = tauberian_convert(alpha, theta)
    back = tauberian_invert(fwd.lt_alpha, fwd.lt_theta)
    assert back.alpha == pytest.approx(alpha, rel=1e-12, abs=1e-15)
    assert back.theta == pytest.approx(theta, rel=1e-12, abs=1e-15)


def test_fit_power_fl():
    c = laplace_curve(off("fl(m=2)"), None, log_grid(1e2, 1e8, 30))
    _, exponent, r2 = fit_lt_rate(c, "power")
    assert exponent == pytest.approx(-1.0, abs=0.02)
    assert r2 > 0.999


def test_fit_stretched():
    c = laplace_curve(off("{2:.5,3:.5}"), None, log_grid(1e4, 1e12, 40))
    _, exponent, _ = fit_lt_rate(c, "stretched")
    assert exponent == pytest.approx(math.log(2) / math.log(2.5), rel=0.10)


def test_fit_logsq():
    c = laplace_curve(off("{1:.5,2:.5}"), imm("{1:1}"), log_grid(1e4, 1e12, 40), "curlyW")
    coef, _, _ = fit_lt_rate(c, "logsq")
    assert coef == pytest.approx(math.log(2) / (2 * math.log(1.5) ** 2), rel=0.20)


def test_fit_requires_three_decades():
    c = laplace_curve(off("fl(m=2)"), None, log_grid(1e2, 5e4, 10))
    with pytest.raises(ValueError):
        fit_lt_rate(c, "power")


def test_curve_csv_roundtrip(tmp_path):
    c = laplace_curve(off("{1:.5,2:.5}"), imm("{0:.5,1:.5}"), log_grid(1, 1e10, 12), "curlyW")
    path = tmp_path / "laplace.csv"
    c.to_csv(path)
    head = path.read_text().splitlines()
    assert any(line.startswith("lambda,log_value,depth,terms") for line in head)
    back = LaplaceCurve.from_csv(path)
    assert np.array_equal(back.lambdas, c.lambdas)
    assert np.array_equal(back.log_values, c.log_values)
    assert np.array_equal(back.depths, c.depths)
