"""Sparse direct solves with a checked residual contract."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DEFAULT_TOL = 1e-10
_REFINEMENT_SWEEPS = 3


class SolverError(RuntimeError):
    """Factorization breakdown or residual above tolerance."""

    def __init__(self, message, residual=np.nan):
        super().__init__(message)
        self.residual = residual


@dataclass
class BlockSystem:
    """Square block matrix with its right-hand side.

    ``blocks`` maps ``(row_block, col_block)`` to a sparse matrix, a dense
    array, or a ``(scale, matrix)`` pair; missing blocks are zero.
    """

    sizes: list[int]
    blocks: dict = field(default_factory=dict)
    rhs: np.ndarray | None = None

    def __post_init__(self):
        n = sum(self.sizes)
        for (i, j), blk in self.blocks.items():
            shape = _block(blk).shape
            if shape != (self.sizes[i], self.sizes[j]):
                raise ValueError(f"block ({i}, {j}) has shape {shape}, "
                                 f"expected {(self.sizes[i], self.sizes[j])}")
        if self.rhs is not None and len(self.rhs) != n:
            raise ValueError(f"rhs length {len(self.rhs)} != system size {n}")

    @property
    def shape(self):
        n = sum(self.sizes)
        return n, n

    def matrix(self) -> sp.csc_matrix:
        nb = len(self.sizes)
        grid = [[None] * nb for _ in range(nb)]
        for (i, j), blk in self.blocks.items():
            grid[i][j] = sp.csr_matrix(_block(blk))
        for i, n in enumerate(self.sizes):
            if all(grid[i][j] is None for j in range(nb)):
                grid[i][i] = sp.csr_matrix((n, n))
        for j, n in enumerate(self.sizes):
            if all(grid[i][j] is None for i in range(nb)):
                grid[j][j] = sp.csr_matrix((n, n))
        return sp.bmat(grid, format="csc")


def _block(blk):
    if isinstance(blk, tuple):
        scale, A = blk
        return scale * A
    return blk


# SuperLU settings per matrix family.  Taylor-Hood saddle systems factor well
# with a symmetric minimum-degree ordering and near-diagonal pivoting;
# the RT1/DG saddle system prefers COLAMD.  Full partial pivoting is the
# fallback when a factorization breaks down.
ORDERINGS = {
    "symmetric": dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=1e-3,
                      options=dict(SymmetricMode=True)),
    "colamd": dict(permc_spec="COLAMD", diag_pivot_thresh=0.1),
    # used with a caller-supplied symmetric permutation
    "natural": dict(permc_spec="NATURAL", diag_pivot_thresh=1e-3,
                    options=dict(SymmetricMode=True)),
}
_FALLBACK = dict(permc_spec="COLAMD", diag_pivot_thresh=1.0)


def _factor(A, ordering):
    try:
        return spla.splu(A, **ORDERINGS[ordering])
    except RuntimeError:
        pass
    try:
        return spla.splu(A, **_FALLBACK)
    except RuntimeError as exc:
        raise SolverError(f"factorization failed: {exc}") from exc


class Factorization:
    """LU factorization of a fixed sparse matrix, reusable across solves.

    ``perm`` optionally gives a symmetric pre-permutation (``perm[k]`` is the
    original index placed at position ``k``); the factorization then keeps
    that order instead of computing its own.
    """

    def __init__(self, A, tol: float = DEFAULT_TOL, ordering: str = "symmetric",
                 perm: np.ndarray | None = None):
        if ordering not in ORDERINGS:
            raise ValueError(f"unknown ordering {ordering!r}")
        self.A = sp.csc_matrix(A)
        if self.A.shape[0] != self.A.shape[1]:
            raise ValueError(f"matrix is not square: {self.A.shape}")
        self.tol = tol
        self.perm = None
        if perm is not None:
            perm = np.asarray(perm)
            if not np.array_equal(np.sort(perm), np.arange(self.A.shape[0])):
                raise ValueError("perm is not a permutation of the unknowns")
            self.perm = perm
            self._lu = _factor(sp.csc_matrix(self.A[perm][:, perm]), "natural")
        else:
            self._lu = _factor(self.A, ordering)

    def _apply(self, r):
        if self.perm is None:
            return self._lu.solve(r)
        x = np.empty_like(r)
        x[self.perm] = self._lu.solve(r[self.perm])
        return x

    def solve(self, b, tol: float | None = None) -> np.ndarray:
        tol = self.tol if tol is None else tol
        b = np.asarray(b, dtype=float)
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros_like(b)
        x = self._apply(b)
        for _ in range(_REFINEMENT_SWEEPS + 1):
            r = b - self.A @ x
            rel = np.linalg.norm(r) / bnorm
            if not np.isfinite(rel):
                break
            if rel <= tol:
                return x
            x = x + self._apply(r)
        raise SolverError(f"relative residual {rel:.3e} exceeds tolerance {tol:.1e}",
                          residual=rel)


def fill_reducing_order(A, ordering: str = "symmetric") -> np.ndarray:
    """The column order SuperLU picks for ``A`` (position -> original index)."""
    lu = _factor(sp.csc_matrix(A), ordering)
    return np.argsort(lu.perm_c)


def interleave_order(order: np.ndarray, copies: int) -> np.ndarray:
    """Repeat a per-block order over ``copies`` identical blocks, interleaved.

    Position ``copies * k + i`` holds unknown ``order[k]`` of block ``i``.
    """
    n = len(order)
    return (np.asarray(order)[:, None] + n * np.arange(copies)[None, :]).ravel()


def solve(system, tol: float = DEFAULT_TOL, rhs=None,
          ordering: str = "symmetric") -> np.ndarray:
    """Solve ``A x = b`` to ``||A x - b|| <= tol ||b||``.

    ``system`` is a :class:`BlockSystem` or a sparse matrix accompanied by
    ``rhs``.
    """
    if isinstance(system, BlockSystem):
        A, b = system.matrix(), system.rhs
    else:
        A, b = system, rhs
    if b is None:
        raise ValueError("no right-hand side given")
    return Factorization(A, tol, ordering).solve(b)
