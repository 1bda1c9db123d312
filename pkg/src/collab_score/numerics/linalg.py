"""Dense symmetric eigen-decomposition and affine constraint parameterization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from collab_score.errors import DimensionMismatch, InvalidArg, NearSingular, NotSymmetric, RankDeficient

SYMMETRY_TOL = 1e-10
EIGEN_FLOOR = 1e-10


@dataclass(frozen=True, slots=True)
class SymEig:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T


def _fix_column_signs(matrix: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each column is made positive.
    if matrix.size == 0:
        return matrix
    pivots = np.argmax(np.abs(matrix), axis=0)
    signs = np.sign(matrix[pivots, np.arange(matrix.shape[1])])
    signs[signs == 0] = 1.0
    return matrix * signs


def _as_square(a: np.ndarray | list[list[float]]) -> np.ndarray:
    matrix = np.asarray(a, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {matrix.shape}")
    return matrix


def _check_floor(floor: float) -> None:
    if not floor > 0:
        raise InvalidArg(f"eigenvalue floor must be > 0, got {floor}")


def sym_eig(a: np.ndarray | list[list[float]]) -> SymEig:
    matrix = _as_square(a)
    asymmetry = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
    if asymmetry > SYMMETRY_TOL:
        raise NotSymmetric(f"matrix is not symmetric (max |A - A^T| = {asymmetry:.3e})")
    sym = 0.5 * (matrix + matrix.T)
    values, vectors = np.linalg.eigh(sym)
    order = np.argsort(values)[::-1]
    return SymEig(eigenvalues=values[order], eigenvectors=_fix_column_signs(vectors[:, order]))


def inv_sqrt_psd(a: np.ndarray | list[list[float]], floor: float = EIGEN_FLOOR) -> np.ndarray:
    _check_floor(floor)
    eig = sym_eig(a)
    if eig.eigenvalues.size and float(eig.eigenvalues[-1]) < floor:
        raise NearSingular(
            f"smallest eigenvalue {float(eig.eigenvalues[-1]):.3e} is below the floor {floor:.1e}"
        )
    q = eig.eigenvectors
    return (q / np.sqrt(eig.eigenvalues)) @ q.T


def inv_psd(a: np.ndarray | list[list[float]], floor: float = EIGEN_FLOOR) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix, refusing near-singular input."""
    _check_floor(floor)
    eig = sym_eig(a)
    if eig.eigenvalues.size and float(eig.eigenvalues[-1]) < floor:
        raise NearSingular(
            f"smallest eigenvalue {float(eig.eigenvalues[-1]):.3e} is below the floor {floor:.1e}"
        )
    q = eig.eigenvectors
    return (q / eig.eigenvalues) @ q.T


def null_space_affine(
    c: np.ndarray | list[list[float]],
    t: np.ndarray | list[float],
) -> tuple[np.ndarray, np.ndarray]:
    """Parameterize {theta : C theta = t} as theta0 + Z u with orthonormal Z.

    theta0 is the minimum-norm feasible point. Z spans the null space of C,
    with column signs fixed so that results are reproducible.
    """
    constraint = np.atleast_2d(np.asarray(c, dtype=float))
    target = np.atleast_1d(np.asarray(t, dtype=float))
    r, d = constraint.shape
    if target.shape != (r,):
        raise DimensionMismatch(f"t has shape {target.shape}, expected ({r},)")
    if r > d:
        raise RankDeficient(f"C has more rows ({r}) than columns ({d})")

    tol = 1e-10 * max(float(np.max(np.abs(constraint))), 0.0) * max(r, d)
    singular_values = np.linalg.svd(constraint, compute_uv=False)
    rank = int(np.sum(singular_values > tol)) if tol > 0 else 0
    if rank < r:
        raise RankDeficient(f"C has numerical rank {rank} < {r}")

    q, upper = np.linalg.qr(constraint.T, mode="complete")
    q_range = q[:, :r]
    coefficients = np.linalg.solve(upper[:r, :r].T, target)
    theta0 = q_range @ coefficients
    basis = _fix_column_signs(q[:, r:].copy())
    return theta0, basis
