import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsg.errors import DomainError
from qsg.model import generate_instance
from qsg.numerics import (
    Clamp,
    closed_form_x,
    closed_form_y,
    finite_diff_grad,
    lambert_w0,
    lambert_w0_of_exp,
    maximize_unimodal,
    stationarity_residual,
)
from qsg.objective import g_term_x


def test_lambert_known_values():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-15)
    assert lambert_w0(1.0) == pytest.approx(0.5671432904097838, abs=1e-15)


@settings(max_examples=300, deadline=None)
@given(z=st.floats(0, 1e12, allow_nan=False))
def test_lambert_residual(z):
    w = lambert_w0(z)
    assert abs(w * math.exp(w) - z) <= 1e-10 * max(1.0, z)


def test_lambert_vectorised_matches_scalar():
    zs = np.logspace(-8, 8, 50)
    np.testing.assert_allclose(lambert_w0(zs), [lambert_w0(float(z)) for z in zs], rtol=1e-15)


def test_lambert_log_space_for_huge_arguments():
    # W(e^L) solves w + log w = L
    for L in (600.0, 1e4, 1e8):
        w = float(lambert_w0_of_exp(L))
        assert w + math.log(w) == pytest.approx(L, rel=1e-14)


@pytest.mark.parametrize("z", [-0.1, math.nan, math.inf])
def test_lambert_domain(z):
    with pytest.raises(DomainError):
        lambert_w0(z)


def test_closed_form_no_duals_reduces():
    inst = generate_instance(2, 20)
    for j in range(20):
        d0 = float(inst.loss_def[j]) + 0.3
        s = inst.lam * inst.w_att[j]
        expected = (1 / s) * (1 - (s / inst.w_def[j]) * (inst.loss_def[j] - d0))
        res = closed_form_y(inst, j, 0.0, 0.0, d0)
        assert res.beta_interior == pytest.approx(expected, rel=1e-12)
        assert res.x_star == pytest.approx(min(max(expected, 0.0), 1.0), abs=1e-12)


def test_closed_form_large_nu_clamps_low():
    inst = generate_instance(2, 20)
    res = closed_form_y(inst, 4, 1e9, 0.0, 0.0)
    assert res.clamped is Clamp.LOWER
    assert res.x_star == 0.0 and res.y_star == 1.0
    assert res.beta_interior <= 0


def test_closed_form_rejects_negative_duals():
    inst = generate_instance(2, 20)
    with pytest.raises(DomainError):
        closed_form_y(inst, 0, -1.0, 0.0, 0.0)


def test_closed_form_matches_golden_section():
    rng = np.random.default_rng(0)
    insts = [generate_instance(s, 20) for s in range(3)]
    for _ in range(300):
        inst = insts[rng.integers(3)]
        j = int(rng.integers(20))
        scale = float(np.exp(inst.lam * inst.reward_att[j]) * inst.w_def[j])
        nu, mu = rng.uniform(0, 2 * scale), rng.uniform(0, scale) * (rng.random() < 0.5)
        d0 = rng.uniform(-10, 10)
        res = closed_form_y(inst, j, nu, mu, d0)
        x_ref, _ = maximize_unimodal(lambda x: g_term_x(inst, j, nu + mu, x, d0), 0.0, 1.0, 1e-10)
        assert res.x_star == pytest.approx(x_ref, abs=1e-6)


def test_interior_optimum_is_stationary():
    inst = generate_instance(3, 20)
    hits = 0
    for j in range(20):
        for d0 in np.linspace(-10, 10, 21):
            res = closed_form_y(inst, j, 5.0, 0.0, float(d0))
            if res.clamped is Clamp.INTERIOR:
                hits += 1
                assert abs(stationarity_residual(inst, j, 5.0, res.x_star, float(d0))) < 1e-7 * math.exp(inst.lam * inst.reward_att[j])
    assert hits > 20


def test_lambda_zero_is_linear_branch():
    # with lambda*w^a = 0 the term is linear in x: full coverage iff w^d*N > t
    N = 1.0
    assert closed_form_x(3.0, -2.0, 4.0, 5.0, 0.0, 2.9, 0.0)[0] == 1.0
    assert closed_form_x(3.0, -2.0, 4.0, 5.0, 0.0, 3.1, 0.0)[0] == 0.0
    assert N * 3.0 > 2.9


def test_maximize_quadratic():
    x, fx = maximize_unimodal(lambda x: -(x - 0.3) ** 2, 0.0, 1.0, 1e-9)
    assert x == pytest.approx(0.3, abs=1e-8)
    assert fx == pytest.approx(0.0, abs=1e-15)


def test_maximize_monotone_hits_bound():
    x, _ = maximize_unimodal(lambda x: x, 0.0, 1.0, 1e-9)
    assert x == pytest.approx(1.0, abs=1e-9)
    x, _ = maximize_unimodal(lambda x: -x, 0.0, 1.0, 1e-9)
    assert x == pytest.approx(0.0, abs=1e-9)


def test_finite_diff_linear_exact():
    a = np.array([2.0, -3.0, 0.5])
    for h in (1e-2, 1e-5, 0.3):
        np.testing.assert_allclose(finite_diff_grad(lambda v: float(a @ v) + 4, [1.0, 2.0, 3.0], h), a, atol=1e-9)


def test_finite_diff_quadratic():
    g = finite_diff_grad(lambda v: float(v[0] ** 2 + v[1] ** 2), [1.0, 1.0], 1e-5)
    np.testing.assert_allclose(g, [2.0, 2.0], atol=1e-8)
