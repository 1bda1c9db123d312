"""Plug-in variance, the Omega projection and the score statistic."""

from __future__ import annotations

import numpy as np

from collab_score.errors import DimensionMismatch, InvalidArg
from collab_score.inference.models import LinearHypothesis
from collab_score.numerics import chi2_quantile, inv_psd, inv_sqrt_psd, noncentral_chi2_sf


def _symmetric(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _augmented_constraint(constraint: np.ndarray, s_hat: int) -> np.ndarray:
    """C_a0 = (C, 0_{r x s})^T, a q x r matrix."""
    c_mat = np.atleast_2d(np.asarray(constraint, dtype=float))
    r = c_mat.shape[0]
    return np.vstack([c_mat.T, np.zeros((s_hat, r))])


def build_omega_blocks(
    j_mat: np.ndarray,
    k_mat: np.ndarray,
    constraint: np.ndarray,
    s_hat: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Omega = V^{-1/2} C_a0^T J^{-1} and V = C_a0^T J^{-1} K J^{-1} C_a0."""
    if s_hat < 0:
        raise InvalidArg(f"s_hat must be >= 0, got {s_hat}")
    ca0 = _augmented_constraint(constraint, s_hat)
    q = ca0.shape[0]
    j_arr = np.asarray(j_mat, dtype=float)
    k_arr = np.asarray(k_mat, dtype=float)
    if j_arr.shape != (q, q) or k_arr.shape != (q, q):
        raise DimensionMismatch(f"J and K must be {q}x{q}, got {j_arr.shape} and {k_arr.shape}")
    j_inv = inv_psd(j_arr)
    leverage = j_inv @ ca0
    v_mat = _symmetric(leverage.T @ k_arr @ leverage)
    omega = inv_sqrt_psd(v_mat) @ leverage.T
    return omega, v_mat


def build_omega(
    j0_hat: np.ndarray,
    k0_hat: np.ndarray,
    hyp: LinearHypothesis,
    s_hat: int,
) -> tuple[np.ndarray, np.ndarray]:
    return build_omega_blocks(j0_hat, k0_hat, hyp.C, s_hat)


def projection_matrix(j0: np.ndarray, constraint: np.ndarray, s_hat: int) -> np.ndarray:
    """P0 = J^{-1/2} C_a0 Psi^{-1} C_a0^T J^{-1/2} with Psi = C_a0^T J^{-1} C_a0."""
    ca0 = _augmented_constraint(constraint, s_hat)
    j_arr = np.asarray(j0, dtype=float)
    if j_arr.shape != (ca0.shape[0], ca0.shape[0]):
        raise DimensionMismatch(f"J must be {ca0.shape[0]}x{ca0.shape[0]}, got {j_arr.shape}")
    j_inv_sqrt = inv_sqrt_psd(j_arr)
    whitened = j_inv_sqrt @ ca0
    psi = _symmetric(whitened.T @ whitened)
    return _symmetric(whitened @ inv_psd(psi) @ whitened.T)


def cst_statistic(n: int, omega: np.ndarray, g_b: np.ndarray) -> float:
    """N * ||Omega g_b||^2."""
    omega_arr = np.atleast_2d(np.asarray(omega, dtype=float))
    score = np.asarray(g_b, dtype=float)
    if score.shape != (omega_arr.shape[1],):
        raise DimensionMismatch(f"g_b has shape {score.shape}, Omega expects ({omega_arr.shape[1]},)")
    projected = omega_arr @ score
    return float(n * (projected @ projected))


def noncentrality(v_mat: np.ndarray, h: np.ndarray, n: int) -> float:
    """e_N = N h^T V^{-1} h."""
    deviation = np.atleast_1d(np.asarray(h, dtype=float))
    v_arr = np.atleast_2d(np.asarray(v_mat, dtype=float))
    if v_arr.shape != (deviation.shape[0], deviation.shape[0]):
        raise DimensionMismatch(f"V has shape {v_arr.shape}, h has length {deviation.shape[0]}")
    return float(max(n * (deviation @ inv_psd(v_arr) @ deviation), 0.0))


def asymptotic_power(hyp: LinearHypothesis, v_mat: np.ndarray, h: np.ndarray, n: int, alpha: float) -> float:
    """P(chi2(r, e_N) > chi2_alpha(r)) for the local alternative C theta - t = h."""
    deviation = np.atleast_1d(np.asarray(h, dtype=float))
    if deviation.shape != (hyp.r,):
        raise DimensionMismatch(f"h has length {deviation.shape[0]}, hypothesis has r={hyp.r}")
    if n < 1:
        raise InvalidArg(f"N must be >= 1, got {n}")
    critical = chi2_quantile(alpha, hyp.r)
    return noncentral_chi2_sf(critical, hyp.r, noncentrality(v_mat, deviation, n))
