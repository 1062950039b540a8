"""Graded time grids, the Lobatto IIIC tableau and extrapolation.

The grid refines geometrically-then-algebraically towards ``t = 0``:

* ``tau_1 = T (tau / T) ** (1 / (1 - alpha))``;
* ``tau_n = min(tau, growth * tau_{n-1}, (t_{n-1} / T) ** alpha * tau / (1 - alpha))``
  for ``n >= 2``, with the last step clipped to land on ``T``.

The factor ``1 / (1 - alpha)`` keeps ``N <= 2 T / tau`` for every
``alpha < 1``; the ``growth`` cap keeps consecutive steps within a fixed ratio
during the start-up phase.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate

MAX_GROWTH = 2.5


@dataclass(frozen=True)
class TimeGrid:
    levels: np.ndarray
    alpha: float
    tau: float

    @property
    def T(self) -> float:
        return float(self.levels[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.levels)

    @property
    def n_steps(self) -> int:
        return len(self.levels) - 1

    def stepsize(self, n: int) -> float:
        """``tau_n = t_n - t_{n-1}`` (1-based, as in the scheme)."""
        return float(self.levels[n] - self.levels[n - 1])

    def __eq__(self, other):
        return (isinstance(other, TimeGrid) and self.alpha == other.alpha
                and self.tau == other.tau and np.array_equal(self.levels, other.levels))


def build_graded_grid(T: float, tau: float, alpha: float,
                      growth: float = MAX_GROWTH) -> TimeGrid:
    """Time levels graded towards ``t = 0`` with exponent ``alpha``."""
    if not T > 0:
        raise ValueError(f"final time must be positive, got {T}")
    if not 0 < tau < T:
        raise ValueError(f"maximal stepsize must lie in (0, T), got {tau}")
    if not 0 <= alpha < 1:
        raise ValueError(f"grading exponent must lie in [0, 1), got {alpha}")
    T, tau, alpha = float(T), float(tau), float(alpha)

    if alpha == 0.0:
        n = T / tau
        if abs(n - round(n)) < 1e-9 * n:
            return TimeGrid(np.linspace(0.0, T, int(round(n)) + 1), alpha, tau)

    snap = 1e-10 * tau
    kappa = 1.0 / (1.0 - alpha)
    levels = [0.0, T * (tau / T) ** (1.0 / (1.0 - alpha))]
    prev = levels[1]
    while T - levels[-1] > snap:
        t = levels[-1]
        step = min(tau, growth * prev, kappa * (t / T) ** alpha * tau)
        if t + step >= T - snap:
            step = T - t
        levels.append(t + step)
        prev = step
    levels[-1] = T
    return TimeGrid(np.array(levels), alpha, tau)


@dataclass(frozen=True)
class ButcherTableau:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @property
    def stages(self) -> int:
        return len(self.b)

    @property
    def stiffly_accurate(self) -> bool:
        return bool(np.array_equal(self.a[-1], self.b))

    def algebraic_stability_matrix(self) -> np.ndarray:
        """``d_ij = b_i a_ij + b_j a_ji - b_i b_j``."""
        ba = self.b[:, None] * self.a
        return ba + ba.T - np.outer(self.b, self.b)


def lobatto_iiic() -> ButcherTableau:
    """Two-stage Lobatto IIIC method (order 2, stiffly accurate)."""
    h = Fraction(1, 2)
    a = np.array([[h, -h], [h, h]], dtype=float)
    tab = ButcherTableau(a, np.array([h, h], dtype=float), np.array([0.0, 1.0]))
    assert tab.stiffly_accurate
    assert np.allclose(a.sum(axis=1), tab.c)
    return tab


def extrapolate(u_prev, u_curr, tau_n: float, tau_np1: float, c_i: float, n: int):
    """Linear extrapolation of the step history to the stage time ``t_n + c_i tau_{n+1}``.

    Works on coefficient arrays or :class:`~gradedns.spaces.Field` objects; for
    ``n = 0`` the current value is returned unchanged.
    """
    from .spaces import Field

    if isinstance(u_curr, Field):
        if n >= 1 and u_prev.space is not u_curr.space:
            raise ValueError("extrapolation history lives in different spaces")
        coeffs = extrapolate(None if n == 0 else u_prev.coeffs, u_curr.coeffs,
                             tau_n, tau_np1, c_i, n)
        return Field(u_curr.space, coeffs)
    if n == 0:
        return u_curr
    if np.shape(u_prev) != np.shape(u_curr):
        raise ValueError("extrapolation history has mismatched shapes")
    if not tau_n > 0:
        raise ValueError("previous stepsize must be positive")
    return u_curr + (c_i * tau_np1 / tau_n) * (u_curr - u_prev)


def quadrature_defect(tableau: ButcherTableau, phi, t_n: float, t_np1: float):
    """Defects ``(Q_{n,1}, Q_{n,2}, Q_{n+1})`` of the stage and step quadratures."""
    tau = t_np1 - t_n
    nodes = t_n + tableau.c * tau
    vals = np.array([phi(t) for t in nodes])
    stage = []
    for i in range(tableau.stages):
        exact = integrate.quad(phi, t_n, nodes[i], epsabs=1e-14, epsrel=1e-13)[0] \
            if nodes[i] > t_n else 0.0
        stage.append(exact - tau * tableau.a[i] @ vals)
    exact = integrate.quad(phi, t_n, t_np1, epsabs=1e-14, epsrel=1e-13)[0]
    return stage[0], stage[1], exact - tau * tableau.b @ vals
