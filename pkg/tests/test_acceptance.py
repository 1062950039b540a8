"""Acceptance criteria of the solver, one test per criterion.

Each test records a one-line PASS/FAIL summary that is printed at the end of
the pytest run (see ``conftest.py``).  The expensive studies are module-scoped
fixtures shared between criteria.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from gradedns.harness.studies import (ExperimentConfig, convergence_space, convergence_time,
                                      run_experiment)
from gradedns.harness.validate import random_velocity
from gradedns import assembly
from gradedns.mesh import build_rect_mesh
from gradedns.projections import ProjectionContext
from gradedns.spaces import Field, interpolate_p2, quadrature_rule
from gradedns.timegrid import build_graded_grid, lobatto_iiic, quadrature_defect

pytestmark = pytest.mark.slow

SQUARE = (-np.pi, np.pi, -np.pi, np.pi)
UNIT_PI = (0.0, np.pi, 0.0, np.pi)

# temporal study of the shear datum
SHEAR = ExperimentConfig(domain=SQUARE, mesh_n=24, nu=0.1, T=0.5, alpha=0.76, init="shear",
                         tau=(1 / 16, 1 / 32, 1 / 64), ref_tau=1 / 256)
# spatial study of the vortex pair
VORTEX = ExperimentConfig(domain=SQUARE, mesh_n=(8, 16, 32), nu=0.1, T=0.1, alpha=0.76,
                          init="vortex", tau=1 / 128, ref_refines=1)
# manufactured Stokes problem with a smooth solution
STOKES_TIME = ExperimentConfig(domain=UNIT_PI, mesh_n=8, nu=1.0, T=0.5, alpha=0.0,
                               init="manufactured", tau=(1 / 16, 1 / 32, 1 / 64),
                               ref_tau=1 / 256)
STOKES_SPACE = ExperimentConfig(domain=UNIT_PI, mesh_n=(4, 8, 16), nu=1.0, T=0.1, alpha=0.0,
                                init="manufactured", tau=1 / 256, ref_exact=True,
                                ref_refines=0)


def report(number, title, ok, detail):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def fmt(values):
    return ", ".join("-" if v is None else f"{v:.3f}" for v in values)


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def temporal():
    return timed(convergence_time, SHEAR)


@pytest.fixture(scope="module")
def spatial():
    return timed(convergence_space, VORTEX)


@pytest.fixture(scope="module")
def manufactured():
    (t_table, t_time) = timed(convergence_time, STOKES_TIME)
    (s_table, s_time) = timed(convergence_space, STOKES_SPACE)
    (rt_errors, rt_time) = timed(rt_projection_errors, (4, 8, 16))
    return t_table, s_table, rt_errors, t_time + s_time + rt_time


@pytest.fixture(scope="module")
def rerun():
    return run_experiment(SHEAR, tau=SHEAR.ref_tau)


def all_histories(*tables):
    for table in tables:
        for name, hist in table.histories.items():
            yield name, hist


# -------------------------------------------------------------- criterion 1

def test_criterion_1_temporal_second_order(temporal):
    table, seconds = temporal
    rates = table.rates[1:]
    ok = all(1.6 <= r <= 2.4 for r in rates)
    report(1, "temporal EOC in [1.6, 2.4], shear, nx=24, alpha=0.76", ok,
           f"errors {', '.join(f'{e:.3e}' for e in table.errors)}; rates {fmt(rates)}; "
           f"{seconds:.0f}s")
    assert ok, rates


# -------------------------------------------------------------- criterion 2

def test_criterion_2_spatial_second_order(spatial):
    table, seconds = spatial
    rates = table.rates[1:]
    ok = all(1.6 <= r <= 2.4 for r in rates)
    report(2, "spatial EOC in [1.6, 2.4], vortex pair, nx=8/16/32 vs 64", ok,
           f"errors {', '.join(f'{e:.3e}' for e in table.errors)}; rates {fmt(rates)}; "
           f"{seconds:.0f}s")
    assert ok, rates


# -------------------------------------------------------------- criterion 3

def test_criterion_3_energy_decay(temporal, spatial, rerun):
    worst = -np.inf
    steps = 0
    runs = list(all_histories(temporal[0], spatial[0])) + [("rerun", rerun.history)]
    for _, hist in runs:
        h0 = hist[0]
        e0 = h0.energy + h0.dissipation - h0.energy_defect  # ||u^0||^2
        for d in hist:
            worst = max(worst, d.energy_defect / e0)
            steps += 1
    ok = worst <= 1e-8
    report(3, "energy defect <= 1e-8 ||u0||^2 on every unforced step", ok,
           f"max relative defect {worst:.2e} over {steps} steps in {len(runs)} runs")
    assert ok


# -------------------------------------------------------------- criterion 4

def test_criterion_4_exact_divergence_and_skew():
    ctx = ProjectionContext(build_rect_mesh(0.0, 1.0, 0.0, 1.0, 2, 2))
    rng = np.random.default_rng(4)
    worst_div = worst_skew = 0.0
    for _ in range(100):
        w = ctx.rt_project(random_velocity(ctx, rng))
        worst_div = max(worst_div, ctx.max_divergence_coefficient(w))
        N = assembly.assemble_convection(w, ctx.vspace)
        u = random_velocity(ctx, rng)
        scale = ctx.rt_l2_norm(w.coeffs) * ctx.h1_seminorm(u) ** 2
        worst_skew = max(worst_skew, abs(u @ (N @ u)) / scale)
    ok = worst_div <= 1e-11 and worst_skew <= 1e-11
    report(4, "RT divergence and convection skew <= 1e-11, 100 samples", ok,
           f"max divergence {worst_div:.2e}, max skew {worst_skew:.2e}")
    assert ok


# -------------------------------------------------------------- criterion 5

def test_criterion_5_stiff_accuracy(temporal, spatial, manufactured, rerun):
    worst = 0.0
    steps = 0
    runs = list(all_histories(temporal[0], spatial[0], manufactured[0], manufactured[1]))
    runs.append(("rerun", rerun.history))
    for _, hist in runs:
        for d in hist:
            worst = max(worst, d.stiff_error / np.sqrt(d.energy))
            steps += 1
    ok = worst <= 1e-9
    report(5, "||u^{n+1} - u^{n,2}|| <= 1e-9 ||u^{n+1}||", ok,
           f"max relative {worst:.2e} over {steps} steps")
    assert ok


# -------------------------------------------------------------- criterion 6

def test_criterion_6_order_conditions():
    tab = lobatto_iiic()
    t0 = 0.37
    lin = max(abs(quadrature_defect(tab, lambda t: 3 * t - 1, t0, t0 + tau)[2])
              for tau in (0.2, 0.1, 0.05))
    q2 = [quadrature_defect(tab, lambda t: t * t, t0, t0 + tau) for tau in (0.1, 0.05)]
    step_ratio = q2[0][2] / q2[1][2]
    const = max(abs(q) for q in quadrature_defect(tab, lambda t: 2.5, t0, t0 + 0.1)[:2])
    q1 = [quadrature_defect(tab, lambda t: t, t0, t0 + tau) for tau in (0.1, 0.05)]
    stage_ratio = q1[0][0] / q1[1][0]
    ok = (lin <= 1e-13 and abs(step_ratio - 8) <= 0.4 and const <= 1e-13
          and abs(stage_ratio - 4) <= 0.2)
    report(6, "quadrature defects: Q_{n+1} linear 0, t^2 ratio 8; Q_{n,i} const 0, ratio 4", ok,
           f"linear {lin:.1e}, t^2 ratio {step_ratio:.4f}, constant {const:.1e}, "
           f"stage ratio {stage_ratio:.4f}")
    assert ok


# -------------------------------------------------------------- criterion 7

def smooth_solenoidal(x, y):
    """``curl(sin x sin y)``: divergence free with zero normal trace on (0, pi)^2."""
    return np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)


def rt_projection_errors(ns):
    rule = quadrature_rule(6)
    errors = []
    for n in ns:
        ctx = ProjectionContext(build_rect_mesh(*UNIT_PI, n, n))
        v = interpolate_p2(ctx.vspace, smooth_solenoidal)
        w = ctx.rt_project(Field(ctx.vspace, v))
        wq = assembly.eval_rt_field(w, rule)
        xq = assembly.quadrature_points(ctx.rtspace, rule)
        fx, fy = smooth_solenoidal(xq[..., 0], xq[..., 1])
        jxw = ctx.rtspace.geometry.det[:, None] * rule.weights
        errors.append(float(np.sqrt(np.sum(jxw * ((wq[..., 0] - fx) ** 2
                                                  + (wq[..., 1] - fy) ** 2)))))
    return errors


def test_criterion_7_manufactured(manufactured):
    t_table, s_table, rt_errors, seconds = manufactured
    t_rates, s_rates = t_table.rates[1:], s_table.rates[1:]
    rt_rates = [np.log2(a / b) for a, b in zip(rt_errors[:-1], rt_errors[1:])]
    ok = (all(1.8 <= r <= 2.2 for r in t_rates) and all(2.6 <= r <= 3.2 for r in s_rates)
          and all(1.7 <= r <= 2.3 for r in rt_rates) and seconds <= 180)
    report(7, "manufactured Stokes time [1.8, 2.2], space [2.6, 3.2]; RT projection [1.7, 2.3]",
           ok, f"time {fmt(t_rates)}; space {fmt(s_rates)}; RT {fmt(rt_rates)}; {seconds:.0f}s")
    assert ok


# -------------------------------------------------------------- criterion 8

def test_criterion_8_graded_grids():
    worst_ratio, worst_count, cases = 0.0, 0.0, 0
    for T in (0.1, 0.5, 1.0, 2.0):
        for alpha in (0.0, 0.3, 0.5, 0.76, 0.9):
            for k in range(3, 11):
                tau = T * 2.0 ** -k
                g = build_graded_grid(T, tau, alpha)
                s = g.steps
                if len(s) > 2:
                    worst_ratio = max(worst_ratio, (s[1:-1] / s[:-2]).max())
                worst_count = max(worst_count, g.n_steps * tau / T)
                cases += 1
    ok = worst_ratio <= 3.0 and worst_count <= 4.0
    report(8, "graded grids: step ratio <= 3, N <= 4 T / tau", ok,
           f"max ratio {worst_ratio:.3f}, max N tau / T {worst_count:.3f} over {cases} grids")
    assert ok


# -------------------------------------------------------------- criterion 9

def test_criterion_9_determinism(temporal, rerun):
    ref = temporal[0].reference.coeffs
    ok = np.array_equal(ref, rerun.velocity.coeffs) and ref.tobytes() == rerun.velocity.coeffs.tobytes()
    report(9, "bit-identical rerun of the criterion 1 reference", ok,
           f"{ref.size} coefficients, max difference {np.abs(ref - rerun.velocity.coeffs).max():.1e}")
    assert ok
