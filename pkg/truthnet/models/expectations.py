"""Expectations under the mean-field factors shared by several updates."""
from typing import Tuple

import numpy as np

from truthnet.inference.mathkernels import digamma


def expected_log_beta(lam) -> Tuple[float, float]:
    """(E[ln beta], E[ln(1 - beta)]) under Beta(G, H)."""
    g, h = (float(v) for v in lam)
    total = digamma(g + h)
    return digamma(g) - total, digamma(h) - total


def expected_log_beta_rows(lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized ``expected_log_beta`` over a (K, 2) array of (G, H) rows."""
    total = digamma(lam.sum(axis=1))
    return digamma(lam[:, 0]) - total, digamma(lam[:, 1]) - total


def expected_log_dirichlet(params) -> np.ndarray:
    """Psi(a_k) - Psi(sum_k a_k) along the last axis."""
    a = np.asarray(params, dtype=float)
    return digamma(a) - digamma(a.sum(axis=-1, keepdims=True))


def expected_log_pi(gamma_n) -> np.ndarray:
    return expected_log_dirichlet(gamma_n)


def expected_log_omega(xi_row) -> np.ndarray:
    """Row-wise E[ln omega(r, r')]; accepts a single row or any stack of rows."""
    return expected_log_dirichlet(xi_row)
