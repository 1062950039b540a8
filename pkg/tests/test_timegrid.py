import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradedns.spaces import Field, SpaceKind, build_space
from gradedns.timegrid import (MAX_GROWTH, build_graded_grid, extrapolate, lobatto_iiic,
                               quadrature_defect)


def grid_properties(g, T, tau):
    steps = g.steps
    assert g.levels[0] == 0.0 and g.levels[-1] == T
    assert np.all(steps > 0)
    assert steps.max() <= tau * (1 + 1e-12)
    ratios = steps[1:-1] / steps[:-2]
    assert ratios.size == 0 or ratios.max() <= 3.0
    assert g.n_steps <= 4 * T / tau


def test_uniform_when_alpha_zero():
    g = build_graded_grid(1.0, 0.125, 0.0)
    assert g.n_steps == 8
    assert np.allclose(g.steps, 0.125, rtol=0, atol=1e-15)


def test_uniform_non_divisible():
    g = build_graded_grid(1.0, 0.3, 0.0)
    assert np.allclose(g.steps[:-1], 0.3) and g.levels[-1] == 1.0
    assert g.steps[-1] <= 0.3


def test_first_step():
    g = build_graded_grid(1.0, 0.25, 0.5)
    assert g.stepsize(1) == pytest.approx(1 / 16, rel=1e-14)
    g = build_graded_grid(2.0, 0.25, 0.5)
    assert g.stepsize(1) == pytest.approx(2.0 * (0.125) ** 2, rel=1e-14)


def test_graded_example_count_and_ratio():
    g = build_graded_grid(1.0, 1 / 32, 0.76)
    grid_properties(g, 1.0, 1 / 32)
    assert g.n_steps <= 128
    assert g.stepsize(1) == pytest.approx((1 / 32) ** (1 / 0.24), rel=1e-13)
    # steps are non-decreasing except the clipped final one
    assert np.all(np.diff(g.steps[:-1]) >= -1e-15)


def test_steps_follow_power_law_away_from_start():
    T, tau, alpha = 1.0, 1 / 64, 0.5
    g = build_graded_grid(T, tau, alpha)
    t = g.levels[1:-1]
    # either the cap tau, the growth limit, or the graded rule is active
    kappa = 1 / (1 - alpha)
    bound = np.minimum(tau, kappa * (t / T) ** alpha * tau)
    assert np.all(g.steps[1:] <= bound * (1 + 1e-12))


@settings(max_examples=40, deadline=None)
@given(alpha=st.sampled_from([0.0, 0.3, 0.5, 0.76, 0.9]), k=st.integers(3, 8),
       T=st.sampled_from([0.1, 0.5, 1.0, 2.0]))
def test_sweep_properties(alpha, k, T):
    tau = T * 2.0 ** -k
    grid_properties(build_graded_grid(T, tau, alpha), T, tau)


def test_scale_invariance():
    a = build_graded_grid(1.0, 1 / 16, 0.76)
    b = build_graded_grid(0.5, 1 / 32, 0.76)
    assert a.n_steps == b.n_steps
    assert np.allclose(b.levels, 0.5 * a.levels, rtol=1e-12, atol=1e-300)


def test_deterministic_and_equality():
    assert build_graded_grid(0.5, 1 / 64, 0.76) == build_graded_grid(0.5, 1 / 64, 0.76)
    assert build_graded_grid(0.5, 1 / 64, 0.76) != build_graded_grid(0.5, 1 / 64, 0.5)


@pytest.mark.parametrize("args", [(0.0, 0.1, 0.5), (1.0, 0.0, 0.5), (1.0, 1.0, 0.5),
                                  (1.0, 0.1, 1.0), (1.0, 0.1, -0.1), (-1.0, 0.1, 0.0)])
def test_invalid_arguments(args):
    with pytest.raises(ValueError):
        build_graded_grid(*args)


def test_growth_cap_constant():
    assert MAX_GROWTH <= 3.0


def test_tableau():
    tab = lobatto_iiic()
    assert np.array_equal(tab.a, [[0.5, -0.5], [0.5, 0.5]])
    assert np.array_equal(tab.b, [0.5, 0.5]) and np.array_equal(tab.c, [0.0, 1.0])
    assert np.array_equal(tab.a.sum(axis=1), tab.c)
    assert tab.stiffly_accurate and tab.stages == 2
    d = tab.algebraic_stability_matrix()
    assert np.array_equal(d, [[0.25, -0.25], [-0.25, 0.25]])
    assert np.allclose(np.linalg.eigvalsh(d), [0.0, 0.5], atol=1e-15)
    assert tab.b @ tab.c == pytest.approx(0.5, abs=1e-16)  # integral of t over [0, 1]


def test_extrapolate_cases(rng):
    v = rng.standard_normal(6)
    w = rng.standard_normal(6)
    assert extrapolate(v, w, 0.1, 0.2, 1.0, 0) is w
    assert np.array_equal(extrapolate(w, w, 0.1, 0.3, 1.0, 4), w)
    # affine in time: u(t) = a + b t
    a, b = rng.standard_normal(6), rng.standard_normal(6)
    t_prev, t_n, tau = 0.3, 0.4, 0.25
    for c in (0.0, 1.0):
        got = extrapolate(a + b * t_prev, a + b * t_n, t_n - t_prev, tau, c, 3)
        assert np.abs(got - (a + b * (t_n + c * tau))).max() <= 1e-13


def test_extrapolate_fields(unit_mesh):
    V = build_space(unit_mesh, SpaceKind.P2_VECTOR)
    W = build_space(unit_mesh, SpaceKind.RT1)
    u0, u1 = Field(V, np.zeros(V.dof_count)), Field(V, np.ones(V.dof_count))
    out = extrapolate(u0, u1, 0.5, 0.5, 1.0, 1)
    assert out.space is V and np.allclose(out.coeffs, 2.0)
    with pytest.raises(ValueError):
        extrapolate(Field(W, np.zeros(W.dof_count)), u1, 0.5, 0.5, 1.0, 1)
    with pytest.raises(ValueError):
        extrapolate(np.zeros(3), np.zeros(4), 0.5, 0.5, 1.0, 1)
    with pytest.raises(ValueError):
        extrapolate(np.zeros(3), np.zeros(3), 0.0, 0.5, 1.0, 1)


def test_quadrature_defects_constant_and_linear():
    tab = lobatto_iiic()
    assert np.allclose(quadrature_defect(tab, lambda t: 3.0, 0.2, 0.45), 0, atol=1e-15)
    q = quadrature_defect(tab, lambda t: 2 * t - 1, 0.2, 0.45)
    assert abs(q[2]) <= 1e-13
    # the stage rules are only exact for constants
    assert abs(q[0]) > 1e-6 or abs(q[1]) > 1e-6


def test_quadrature_defect_orders():
    tab = lobatto_iiic()
    t0 = 0.3
    big = quadrature_defect(tab, lambda t: t * t, t0, t0 + 0.1)
    small = quadrature_defect(tab, lambda t: t * t, t0, t0 + 0.05)
    assert big[2] / small[2] == pytest.approx(8.0, rel=0.01)
    big = quadrature_defect(tab, lambda t: t, t0, t0 + 0.1)
    small = quadrature_defect(tab, lambda t: t, t0, t0 + 0.05)
    # the first stage rule is only exact for constants: its defect is tau^2 / 2
    assert big[0] == pytest.approx(0.1 ** 2 / 2, rel=1e-12)
    assert big[0] / small[0] == pytest.approx(4.0, rel=0.01)
    # the last stage rule coincides with the step rule (stiff accuracy)
    assert big[1] == big[2] and abs(big[1]) <= 1e-13
