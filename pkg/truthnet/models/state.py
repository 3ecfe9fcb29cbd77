"""Variational parameters and generator ground truth."""
from typing import Optional

import numpy as np
from pydantic import BaseModel, model_validator

from truthnet.errors import DimensionMismatchError
from truthnet.inference.mathkernels import POSITIVITY_FLOOR, apply_floor


class VariationalState(BaseModel):
    """All variational parameters of the mean-field posterior.

    Shapes with N agents, L events, R states, K = max communities and
    M reports:

    - ``phi``   (N, N, K)  q(z_{n->m}); the diagonal is unused and kept at zero.
                           None when pair memberships only live for the
                           pairs of the current stochastic batch
    - ``psi``   (M, K)     q(s_n^l), one row per report
    - ``gamma`` (N, K)     Dirichlet parameters of q(pi_n)
    - ``nu``    (L, R)     q(theta^l)
    - ``xi``    (N, K, R, R) row-wise Dirichlet parameters of q(omega_{n,k})
    - ``lam``   (K, 2)     Beta parameters (G_k, H_k) of q(beta_k)
    - ``mu``    (K, R, R)  Laplace modes of the community confusion rows
    """
    phi: Optional[np.ndarray]
    psi: np.ndarray
    gamma: np.ndarray
    nu: np.ndarray
    xi: np.ndarray
    lam: np.ndarray
    mu: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def check_shapes(self):
        n, k = self.gamma.shape
        r = self.nu.shape[1]
        expected = {
            "xi": (n, k, r, r),
            "lam": (k, 2),
            "mu": (k, r, r),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionMismatchError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.phi is not None and self.phi.shape != (n, n, k):
            raise DimensionMismatchError(f"phi has shape {self.phi.shape}, expected {(n, n, k)}")
        if self.psi.ndim != 2 or self.psi.shape[1] != k:
            raise DimensionMismatchError(f"psi has shape {self.psi.shape}, expected (M, {k})")
        return self

    @property
    def num_agents(self) -> int:
        return self.gamma.shape[0]

    @property
    def num_communities(self) -> int:
        return self.gamma.shape[1]

    @property
    def num_states(self) -> int:
        return self.nu.shape[1]

    def copy(self) -> "VariationalState":
        return VariationalState.model_construct(
            **{
                name: None if getattr(self, name) is None else getattr(self, name).copy()
                for name in type(self).model_fields
            }
        )

    def enforce_floor(self) -> None:
        for name in ("gamma", "xi", "lam", "mu"):
            apply_floor(getattr(self, name))

    def expected_omega(self) -> np.ndarray:
        """Posterior-mean confusion matrices E_q[omega_{n,k}], shape (N, K, R, R)."""
        return self.xi / self.xi.sum(axis=-1, keepdims=True)

    def check_invariants(self, atol: float = 1e-9) -> None:
        """Raise AssertionError if a simplex row or a positivity floor is violated."""
        off_diagonal = ~np.eye(self.num_agents, dtype=bool)
        phi_rows = np.empty((0, self.num_communities)) if self.phi is None else self.phi[off_diagonal]
        for name, rows in (("phi", phi_rows), ("psi", self.psi), ("nu", self.nu)):
            if rows.size and np.max(np.abs(rows.sum(axis=-1) - 1.0)) > atol:
                raise AssertionError(f"{name} rows are off the simplex")
        for name in ("gamma", "xi", "lam", "mu"):
            if np.min(getattr(self, name)) < POSITIVITY_FLOOR * (1 - 1e-12):
                raise AssertionError(f"{name} fell below the positivity floor")


class GroundTruth(BaseModel):
    """Latent values drawn by the synthetic generator."""
    theta: np.ndarray            # (L,) true event states
    s: np.ndarray                # (N, L) community followed by agent n on event l
    pi: np.ndarray               # (N, K) community weights
    community_omega: np.ndarray  # (K, R, R)
    agent_omega: np.ndarray      # (N, K, R, R) omega_{n,k}
    z: Optional[np.ndarray] = None  # (N, N) z_{n->m}, -1 on the diagonal

    class Config:
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def check_truth(self):
        rows = self.agent_omega.sum(axis=-1)
        if np.max(np.abs(rows - 1.0)) > 1e-12:
            raise DimensionMismatchError("agent confusion rows must sum to one")
        k = self.pi.shape[1]
        if self.s.size and (self.s.min() < 0 or self.s.max() >= k):
            raise DimensionMismatchError("community index out of range")
        return self

    def report_confusions(self, agents: np.ndarray, events: np.ndarray) -> np.ndarray:
        """omega*_{n, s*_n^l} for each (n, l) pair, shape (M, R, R)."""
        return self.agent_omega[agents, self.s[agents, events]]

    def dominant_true_communities(self) -> np.ndarray:
        """Most frequent true community per agent (lowest index on ties)."""
        k = self.pi.shape[1]
        counts = np.stack([(self.s == c).sum(axis=1) for c in range(k)], axis=1)
        return np.argmax(counts, axis=1)

    def agent_confusions(self) -> np.ndarray:
        """omega*_n for the fixed-community MSE, shape (N, R, R)."""
        n = np.arange(self.agent_omega.shape[0])
        return self.agent_omega[n, self.dominant_true_communities()]
