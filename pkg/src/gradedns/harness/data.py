"""Analytic initial data and manufactured solutions.

Each datum is a callable ``f(x, y) -> (u, v)`` on arrays.  Data with point
singularities expose them as ``singular_points`` so that load assembly can
refine its quadrature there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RADIUS_FLOOR = 1e-14


@dataclass(frozen=True)
class VortexPair:
    """Two co-rotating vortices of circulation ``gamma`` at ``(-0.5, 0)`` and ``(0.5, 0)``.

    Each vortex is ``gamma / (2 pi) * (-y, x - x_c) / r ** (2 - eps)``, so the
    datum is square integrable but only in ``H^s`` for ``s < eps``.
    """

    gamma: float = 2 * np.pi
    eps: float = 0.1
    centers: tuple = ((-0.5, 0.0), (0.5, 0.0))

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")

    @property
    def singular_points(self) -> np.ndarray:
        return np.array(self.centers, dtype=float)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        u = np.zeros(np.broadcast(x, y).shape)
        v = np.zeros_like(u)
        for cx, cy in self.centers:
            dx, dy = x - cx, y - cy
            # centres are never quadrature points; the floor only guards overflow
            r = np.maximum(np.hypot(dx, dy), RADIUS_FLOOR)
            scale = self.gamma / (2 * np.pi) * r ** (self.eps - 2)
            u = u - dy * scale
            v = v + dx * scale
        return u, v


@dataclass(frozen=True)
class Shear:
    """``(value, 0)`` above ``y = 0`` and ``(-value, 0)`` below."""

    value: float = 10.0
    singular_points = None

    def __call__(self, x, y):
        y = np.asarray(y, dtype=float)
        u = np.where(y > 0, self.value, -self.value) * np.ones(np.broadcast(x, y).shape)
        return u, np.zeros_like(u)


def initial_vortex_pair(gamma: float = 2 * np.pi, eps: float = 0.1) -> VortexPair:
    return VortexPair(gamma, eps)


def initial_shear() -> Shear:
    return Shear()


@dataclass(frozen=True)
class ManufacturedStokes:
    """Smooth Stokes solution ``u = g(t) curl psi`` with zero pressure.

    ``psi = sin^2(a (x - x0)) sin^2(b (y - y0))`` vanishes with its gradient on
    the boundary of the rectangle ``domain``; ``g(t) = cos(omega t)``.  The
    forcing ``u_t - nu Laplace u`` makes ``(u, 0)`` an exact solution.
    """

    domain: tuple = (0.0, np.pi, 0.0, np.pi)
    nu: float = 1.0
    omega: float = np.pi

    def _factors(self, x, y):
        x0, x1, y0, y1 = self.domain
        a, b = np.pi / (x1 - x0), np.pi / (y1 - y0)
        sx, cx = np.sin(2 * a * (x - x0)), np.cos(2 * a * (x - x0))
        sy, cy = np.sin(2 * b * (y - y0)), np.cos(2 * b * (y - y0))
        A = np.sin(a * (x - x0)) ** 2
        B = np.sin(b * (y - y0)) ** 2
        # derivatives of A(x) = sin^2(a (x - x0)) and of B likewise
        dA = (a * sx, 2 * a ** 2 * cx, -4 * a ** 3 * sx)
        dB = (b * sy, 2 * b ** 2 * cy, -4 * b ** 3 * sy)
        return A, dA, B, dB

    def g(self, t):
        return np.cos(self.omega * t)

    def dg(self, t):
        return -self.omega * np.sin(self.omega * t)

    def curl(self, x, y):
        A, dA, B, dB = self._factors(x, y)
        return A * dB[0], -dA[0] * B

    def laplace_curl(self, x, y):
        A, dA, B, dB = self._factors(x, y)
        return dA[1] * dB[0] + A * dB[2], -(dA[2] * B + dA[0] * dB[1])

    def velocity(self, x, y, t):
        u, v = self.curl(x, y)
        return self.g(t) * u, self.g(t) * v

    def initial(self, x, y):
        return self.velocity(x, y, 0.0)

    def forcing(self, x, y, t):
        u, v = self.curl(x, y)
        lu, lv = self.laplace_curl(x, y)
        return (self.dg(t) * u - self.nu * self.g(t) * lu,
                self.dg(t) * v - self.nu * self.g(t) * lv)


INITIAL_DATA = {"vortex": initial_vortex_pair, "shear": initial_shear}
