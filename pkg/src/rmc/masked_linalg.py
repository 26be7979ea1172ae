"""Kernels restricted to the observed index set.

Nothing here forms a dense m x n matrix: products are evaluated only on the
observed cells and the masked residual is multiplied through a CSR matrix
built once per :class:`ObservedMatrix`. One SASD sweep therefore costs
O(|omega| r + (m + n) r^2).

Residual-like quantities (D, H - UV, S, ...) are plain 1-d arrays aligned
with the canonical (row-major) ordering of the observed cells.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

RCOND_MIN = 1e-12


class RankDeficiencyError(np.linalg.LinAlgError):
    """Raised when an r x r Gram matrix is numerically singular."""


class DegenerateDirectionError(ArithmeticError):
    """Raised when a nonzero search direction vanishes on the observed cells."""


@dataclass(frozen=True, eq=False)
class ObservedMatrix:
    """Coordinate view of a partially observed m x n matrix.

    Entries are sorted row-major on construction and must be distinct.
    Indices are 0-based.
    """

    m: int
    n: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    _csr_indptr: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m, n = int(self.m), int(self.n)
        if m < 1 or n < 1:
            raise ValueError(f"matrix dimensions must be positive, got {m}x{n}")
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        if not (rows.shape == cols.shape == values.shape):
            raise ValueError("rows, cols and values must have the same length")
        if rows.size == 0:
            raise ValueError("at least one observed entry is required")
        if rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n:
            raise ValueError(f"observed index out of range for a {m}x{n} matrix")
        if not np.all(np.isfinite(values)):
            raise ValueError("observed values must be finite")
        lin = rows * n + cols
        order = np.argsort(lin, kind="stable")
        lin = lin[order]
        if np.any(lin[1:] == lin[:-1]):
            raise ValueError("duplicate observed entries")
        rows, cols, values = rows[order], cols[order], values[order]
        for arr in (rows, cols, values):
            arr.setflags(write=False)
        indptr = np.concatenate(([0], np.cumsum(np.bincount(rows, minlength=m))))
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_csr_indptr", indptr)

    @classmethod
    def from_dense(cls, x, mask):
        """Observed view of dense ``x`` on the cells where ``mask`` is true."""
        x = np.asarray(x, dtype=float)
        rows, cols = np.nonzero(np.asarray(mask, dtype=bool))
        return cls(x.shape[0], x.shape[1], rows, cols, x[rows, cols])

    @property
    def shape(self):
        return (self.m, self.n)

    @property
    def nnz(self):
        return self.values.size

    def with_values(self, values):
        """Same index set, new values."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.values.shape:
            raise ValueError("values do not match the observed index set")
        return ObservedMatrix(self.m, self.n, self.rows, self.cols, values)

    def to_csr(self, values=None):
        """Embed ``values`` (default: the observations) into a sparse m x n matrix."""
        vals = self.values if values is None else np.asarray(values, dtype=float)
        if vals.shape != self.values.shape:
            raise ValueError("values do not match the observed index set")
        return sp.csr_matrix((vals, self.cols, self._csr_indptr), shape=self.shape)

    def to_dense(self, fill=0.0):
        out = np.full(self.shape, fill, dtype=float)
        out[self.rows, self.cols] = self.values
        return out


@dataclass(frozen=True)
class FactorPair:
    """Dense factors ``U`` (m x r) and ``V`` (r x n) of the iterate ``M = U V``."""

    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        V = np.asarray(self.V, dtype=float)
        if U.ndim != 2 or V.ndim != 2 or U.shape[1] != V.shape[0]:
            raise ValueError(f"incompatible factor shapes {U.shape} and {V.shape}")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def r(self):
        return self.U.shape[1]

    @property
    def shape(self):
        return (self.U.shape[0], self.V.shape[1])

    def product(self):
        return self.U @ self.V


def _check_dims(omega, m, n):
    if omega.shape != (m, n):
        raise ValueError(f"factor product is {m}x{n} but omega is {omega.m}x{omega.n}")


def product_on_omega(f, omega):
    """``(U V)_ij`` for every observed cell, without forming ``U V``."""
    _check_dims(omega, *f.shape)
    return np.einsum("ij,ji->i", f.U[omega.rows], f.V[:, omega.cols])


def masked_product(A, B, omega):
    """``(A B)`` on the observed cells for arbitrary conformable ``A``, ``B``."""
    return product_on_omega(FactorPair(A, B), omega)


def residual(x, f, s=None):
    """``x - (U V) - s`` over the observed cells."""
    out = x.values - product_on_omega(f, x)
    if s is not None:
        s = np.asarray(s, dtype=float)
        if s.shape != out.shape:
            raise ValueError("s does not match the observed index set")
        out -= s
    return out


def frob_norm_sq_omega(values):
    values = np.asarray(values, dtype=float)
    return float(np.dot(values, values))


def _spd_solve(G, B, side):
    # G is r x r symmetric; returns G^{-1} B (side='left') or B G^{-1} (side='right')
    eig = np.linalg.eigvalsh(G)
    if not eig[-1] > 0 or eig[0] / eig[-1] < RCOND_MIN:
        raise RankDeficiencyError(
            f"{side} Gram matrix is numerically singular "
            f"(eigenvalues {eig[0]:.3e} .. {eig[-1]:.3e})"
        )
    factor = scipy.linalg.cho_factor(G, check_finite=False)
    if side == "left":
        return scipy.linalg.cho_solve(factor, B, check_finite=False)
    return scipy.linalg.cho_solve(factor, B.T, check_finite=False).T


def direction_u(R, f, omega):
    """Gradient ``gU = R V^T`` and scaled direction ``dU = gU (V V^T)^{-1}``.

    ``R`` is the observed residual ``H - UV``, so ``+dU`` is a descent direction.
    """
    gU = np.asarray(omega.to_csr(R) @ f.V.T)
    return gU, _spd_solve(f.V @ f.V.T, gU, "right")


def direction_v(R, f, omega):
    """Gradient ``gV = U^T R`` and scaled direction ``dV = (U^T U)^{-1} gV``."""
    gV = np.asarray(omega.to_csr(R).T @ f.U).T
    return gV, _spd_solve(f.U.T @ f.U, gV, "left")


def grad_directions(R, f, omega):
    """Return ``(dU, dV, gU, gV)`` at the current factors."""
    gU, dU = direction_u(R, f, omega)
    gV, dV = direction_v(R, f, omega)
    return dU, dV, gU, gV


def step_size(g, d, masked_image):
    """Exact line-search step ``<g, d> / ||(image of d)_omega||^2``.

    ``masked_image`` is ``(d V)_omega`` for a U step or ``(U d)_omega`` for a
    V step.
    """
    if not np.any(d):
        return 0.0
    denom = frob_norm_sq_omega(masked_image)
    if denom == 0.0:
        raise DegenerateDirectionError("search direction vanishes on the observed cells")
    return float(np.vdot(g, d)) / denom


def sasd_step_sizes(g, d, f, omega):
    """Step sizes ``(muU, muV)`` for directions evaluated at the same factors.

    ``g`` and ``d`` are ``(gU, gV)`` and ``(dU, dV)``.
    """
    gU, gV = g
    dU, dV = d
    mu_u = step_size(gU, dU, masked_product(dU, f.V, omega))
    mu_v = step_size(gV, dV, masked_product(f.U, dV, omega))
    return mu_u, mu_v


def sasd_sweep(h, f, omega):
    """One scaled alternating steepest descent sweep on
    ``0.5 * ||h - (U V)_omega||^2``: update U, then V using the new U.

    ``h`` holds the target values on the observed cells.
    """
    R = h - product_on_omega(f, omega)
    gU, dU = direction_u(R, f, omega)
    image = masked_product(dU, f.V, omega)
    mu = step_size(gU, dU, image)
    U = f.U + mu * dU
    R = R - mu * image

    f = FactorPair(U, f.V)
    gV, dV = direction_v(R, f, omega)
    image = masked_product(U, dV, omega)
    mu = step_size(gV, dV, image)
    return FactorPair(U, f.V + mu * dV)
