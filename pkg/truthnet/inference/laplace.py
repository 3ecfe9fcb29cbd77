"""Laplace approximation of the community confusion rows.

The variational density of one community row w = omega_tilde_k(r, .) is not
conjugate; its log density is

    c * sum_n [ lnG(sum w) - sum lnG(w) + sum (w - 1) E ln omega_{n,k}(r, .) ]
    - sum ln w - 1/2 (ln w - M)^T V^-1 (ln w - M) - R/2 ln 2pi - 1/2 ln det V

and the row is approximated by a Gaussian at its mode. The mode search runs
in x = ln w so positivity never needs a projection.
"""
import logging
import math
from typing import NamedTuple

import numpy as np

from truthnet.errors import DomainError
from truthnet.inference.mathkernels import POSITIVITY_FLOOR, SpdMatrix, digamma, log_gamma, trigamma
from truthnet.models.expectations import expected_log_omega
from truthnet.models.options import LaplaceOptions

logger = logging.getLogger(__name__)


class LaplaceFit(NamedTuple):
    mode: np.ndarray
    objective_start: float
    objective_end: float
    steps: int
    converged: bool
    stalled: bool


class LaplaceBatchFit(NamedTuple):
    """Per-row outcome of a batched mode search; every field has one entry per row."""
    modes: np.ndarray
    objective_start: np.ndarray
    objective_end: np.ndarray
    steps: np.ndarray
    converged: np.ndarray
    stalled: np.ndarray


class LaplaceRowObjective:
    """Log density of community rows given summed agent expectations.

    ``count`` is the (possibly scaled) number of agent terms and ``elog_sum``
    the (equally scaled) sum of their E[ln omega] rows. A 2-D ``elog_sum``
    holds one independent row objective per line, all sharing the count and
    the log-normal prior.
    """

    def __init__(self, count: float, elog_sum: np.ndarray, log_mean: np.ndarray, log_cov: SpdMatrix):
        self.count = float(count)
        self.elog_sum = np.asarray(elog_sum, dtype=float)
        self.log_mean = np.asarray(log_mean, dtype=float)
        self.log_cov = log_cov
        self.dim = self.log_mean.shape[0]
        self.constant = -0.5 * self.dim * math.log(2 * math.pi) - 0.5 * log_cov.log_det
        if self.elog_sum.shape[-1] != self.dim or self.elog_sum.ndim > 2:
            raise DomainError(f"summed expectations must have rows of length {self.dim}")

    @classmethod
    def from_xi_rows(cls, xi_rows, log_mean, log_cov: SpdMatrix, scale: float = 1.0) -> "LaplaceRowObjective":
        rows = np.asarray(xi_rows, dtype=float).reshape(-1, log_cov.dim)
        if rows.shape[0] == 0:
            return cls(0.0, np.zeros(log_cov.dim), log_mean, log_cov)
        elog = expected_log_omega(rows)
        return cls(scale * rows.shape[0], scale * elog.sum(axis=0), log_mean, log_cov)

    @property
    def num_rows(self) -> int:
        return 1 if self.elog_sum.ndim == 1 else self.elog_sum.shape[0]

    def _check(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape[-1:] != (self.dim,) or w.ndim > 2:
            raise DomainError(f"row must have length {self.dim}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise DomainError("Laplace objective requires a strictly positive row")
        return w

    def _elog(self, rows=None) -> np.ndarray:
        if self.elog_sum.ndim == 1 or rows is None:
            return self.elog_sum
        return self.elog_sum[rows]

    def _values(self, w: np.ndarray, elog: np.ndarray) -> np.ndarray:
        x = np.log(w)
        dev = x - self.log_mean
        dirichlet = self.count * (log_gamma(w.sum(axis=-1)) - log_gamma(w).sum(axis=-1))
        quadratic = np.sum(dev * (dev @ self.log_cov.precision), axis=-1)
        return (
            dirichlet
            + np.sum((w - 1.0) * elog, axis=-1)
            - x.sum(axis=-1)
            - 0.5 * quadratic
            + self.constant
        )

    def _gradients(self, w: np.ndarray, elog: np.ndarray) -> np.ndarray:
        dev = np.log(w) - self.log_mean
        return (
            self.count * (digamma(w.sum(axis=-1, keepdims=True)) - digamma(w))
            + elog
            - 1.0 / w
            - (dev @ self.log_cov.precision) / w
        )

    def value(self, w):
        """Objective of one row (float) or of every row of a batch (array)."""
        w = self._check(w)
        out = self._values(w, self._elog())
        return float(out) if np.ndim(out) == 0 else out

    def gradient(self, w) -> np.ndarray:
        w = self._check(w)
        return self._gradients(w, self._elog())

    def hessian(self, w) -> np.ndarray:
        w = self._check(w)
        if w.ndim != 1:
            raise DomainError("the Hessian is defined for a single row")
        dev = np.log(w) - self.log_mean
        precision = self.log_cov.precision
        h = self.count * (trigamma(w.sum()) - np.diag(trigamma(w)))
        h += np.diag((1.0 + precision @ dev) / w**2)
        h -= precision / np.outer(w, w)
        return 0.5 * (h + h.T)

    def log_space_hessian(self, w) -> np.ndarray:
        """Hessian of x -> value(exp x)."""
        w = self._check(w)
        return np.outer(w, w) * self.hessian(w) + np.diag(w * self.gradient(w))

    def maximize_rows(self, starts, options: LaplaceOptions, max_steps=None) -> LaplaceBatchFit:
        """Backtracking (Armijo) gradient ascent in log coordinates, every row at once.

        Each row keeps its own step length and stopping state: it stops once
        its log-space gradient's sup norm drops below ``grad_tol``, after
        ``max_steps`` accepted steps, or as stalled when no backtracking
        length makes a step acceptable.
        """
        limit = options.max_steps if max_steps is None else max_steps
        w = np.maximum(np.atleast_2d(np.asarray(starts, dtype=float)), POSITIVITY_FLOOR)
        if w.shape[1] != self.dim or (self.elog_sum.ndim == 2 and w.shape[0] != self.num_rows):
            raise DomainError(f"expected {self.num_rows} starting rows of length {self.dim}")
        x = np.log(w)
        current = np.atleast_1d(self._values(w, self._elog()))
        start_value = current.copy()
        batch = w.shape[0]
        steps = np.zeros(batch, dtype=int)
        converged = np.zeros(batch, dtype=bool)
        stalled = np.zeros(batch, dtype=bool)
        active = np.ones(batch, dtype=bool)
        log_floor = math.log(POSITIVITY_FLOOR)

        while True:
            rows = np.flatnonzero(active)
            if rows.size == 0:
                break
            grad = w[rows] * self._gradients(w[rows], self._elog(rows))
            done = np.max(np.abs(grad), axis=1) < options.grad_tol
            converged[rows[done]] = True
            moving = ~done & (steps[rows] < limit)
            active[rows[~moving]] = False
            rows, grad = rows[moving], grad[moving]
            if rows.size == 0:
                break

            slope = np.sum(grad * grad, axis=1)
            t = np.full(rows.size, options.initial_step)
            accepted = np.zeros(rows.size, dtype=bool)
            candidate = x[rows].copy()
            new_value = current[rows].copy()
            for _ in range(options.max_backtracks):
                pending = np.flatnonzero(~accepted)
                if pending.size == 0:
                    break
                trial = np.maximum(x[rows[pending]] + t[pending, None] * grad[pending], log_floor)
                w_trial = np.exp(trial)
                finite = np.all(np.isfinite(w_trial), axis=1)
                values = np.full(pending.size, -np.inf)
                if finite.any():
                    values[finite] = self._values(w_trial[finite], self._elog(rows[pending[finite]]))
                ok = values >= current[rows[pending]] + options.armijo * t[pending] * slope[pending]
                hit = pending[ok]
                candidate[hit] = trial[ok]
                new_value[hit] = values[ok]
                accepted[hit] = True
                t[pending[~ok]] *= options.shrink

            failed = rows[~accepted]
            if failed.size:
                stalled[failed] = True
                active[failed] = False
                logger.debug(f"Laplace line search stalled on {failed.size} rows")
            moved = rows[accepted]
            x[moved] = candidate[accepted]
            w[moved] = np.exp(candidate[accepted])
            current[moved] = new_value[accepted]
            steps[moved] += 1

        return LaplaceBatchFit(w, start_value, current, steps, converged, stalled)

    def maximize(self, start, options: LaplaceOptions, max_steps=None) -> LaplaceFit:
        """``maximize_rows`` for a single row objective."""
        if self.elog_sum.ndim != 1:
            raise DomainError("use maximize_rows for a batch of rows")
        fit = self.maximize_rows(np.asarray(start, dtype=float)[None, :], options, max_steps)
        return LaplaceFit(
            fit.modes[0],
            float(fit.objective_start[0]),
            float(fit.objective_end[0]),
            int(fit.steps[0]),
            bool(fit.converged[0]),
            bool(fit.stalled[0]),
        )


def laplace_objective(w_row, xi_rows, log_mean, log_cov: SpdMatrix) -> float:
    return LaplaceRowObjective.from_xi_rows(xi_rows, log_mean, log_cov).value(w_row)


def laplace_gradient(w_row, xi_rows, log_mean, log_cov: SpdMatrix) -> np.ndarray:
    return LaplaceRowObjective.from_xi_rows(xi_rows, log_mean, log_cov).gradient(w_row)


def laplace_hessian(w_row, xi_rows, log_mean, log_cov: SpdMatrix) -> np.ndarray:
    return LaplaceRowObjective.from_xi_rows(xi_rows, log_mean, log_cov).hessian(w_row)


def laplace_covariance(mu_row, xi_rows, log_mean, log_cov: SpdMatrix, log_space: bool = False):
    """Negative inverse Hessian at the mode; returns (covariance, is_positive_definite).

    With ``log_space`` the curvature is taken in x = ln w, which is the
    Gaussian over log confusion weights.
    """
    objective = LaplaceRowObjective.from_xi_rows(xi_rows, log_mean, log_cov)
    h = objective.log_space_hessian(mu_row) if log_space else objective.hessian(mu_row)
    covariance = -np.linalg.inv(h)
    covariance = 0.5 * (covariance + covariance.T)
    positive_definite = bool(np.all(np.linalg.eigvalsh(covariance) > 0))
    if not positive_definite:
        logger.warning("Laplace covariance is not positive definite; mode is not a strict maximum")
    return covariance, positive_definite
