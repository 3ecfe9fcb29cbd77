"""Special functions and random sampling primitives used by every update."""
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence
from scipy import linalg, special

from truthnet.errors import DomainError

POSITIVITY_FLOOR = 1e-6


def _as_real_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} requires finite input")
    return arr


def _require_positive(x, name: str) -> np.ndarray:
    arr = _as_real_array(x, name)
    if np.any(arr <= 0):
        raise DomainError(f"{name} requires strictly positive input, got min {arr.min()}")
    return arr


class RngStream:
    """Seeded PCG64 stream with order-independent substreams.

    A substream is addressed by its key path from the root seed, so the draws a
    worker sees depend only on (seed, keys), never on spawn order.
    """

    def __init__(self, seed: int, spawn_key: Tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.spawn_key = tuple(int(k) for k in spawn_key)
        self._generator = Generator(PCG64(SeedSequence(self.seed, spawn_key=self.spawn_key)))

    @property
    def generator(self) -> Generator:
        return self._generator

    def substream(self, *keys: int) -> "RngStream":
        return RngStream(self.seed, self.spawn_key + tuple(keys))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, spawn_key={self.spawn_key})"


class SpdMatrix:
    """Symmetric positive definite matrix with its Cholesky factor cached."""

    def __init__(self, entries):
        arr = _as_real_array(entries, "SpdMatrix")
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise DomainError(f"SpdMatrix must be a non-empty square matrix, got shape {arr.shape}")
        if np.max(np.abs(arr - arr.T)) > 1e-12:
            raise DomainError("SpdMatrix must be symmetric")
        try:
            self.cholesky = linalg.cholesky(arr, lower=True)
        except linalg.LinAlgError as exc:
            raise DomainError(f"SpdMatrix is not positive definite: {exc}") from exc
        self.entries = arr
        self.dim = arr.shape[0]
        self.log_det = 2.0 * float(np.sum(np.log(np.diag(self.cholesky))))
        self.precision = linalg.cho_solve((self.cholesky, True), np.eye(self.dim))

    @classmethod
    def isotropic(cls, dim: int, scale: float) -> "SpdMatrix":
        return cls(scale * np.eye(dim))

    def solve(self, b: np.ndarray) -> np.ndarray:
        return linalg.cho_solve((self.cholesky, True), b)

    def __eq__(self, other) -> bool:
        return isinstance(other, SpdMatrix) and np.array_equal(self.entries, other.entries)

    def __repr__(self) -> str:
        return f"SpdMatrix(dim={self.dim})"


def digamma(x):
    """Digamma function Psi(x) for x > 0 (scalar or array)."""
    arr = _require_positive(x, "digamma")
    out = special.digamma(arr)
    return float(out) if np.ndim(out) == 0 else out


def trigamma(x):
    arr = _require_positive(x, "trigamma")
    out = special.polygamma(1, arr)
    return float(out) if np.ndim(out) == 0 else out


def log_gamma(x):
    """ln Gamma(x) for x > 0 (scalar or array)."""
    arr = _require_positive(x, "log_gamma")
    out = special.gammaln(arr)
    return float(out) if np.ndim(out) == 0 else out


def log_normalize(logits, axis: int = -1) -> np.ndarray:
    """Softmax along ``axis`` computed in the log domain."""
    arr = np.asarray(logits, dtype=float)
    if arr.size == 0 or arr.shape[axis] == 0:
        raise DomainError("log_normalize requires a non-empty vector")
    if not np.all(np.isfinite(arr)):
        raise DomainError("log_normalize requires finite logits")
    return np.exp(arr - special.logsumexp(arr, axis=axis, keepdims=True))


def sample_dirichlet(params, rng: RngStream, size: Optional[Union[int, Tuple[int, ...]]] = None) -> np.ndarray:
    """Dirichlet draw(s); ``size`` prepends batch dimensions."""
    alpha = _require_positive(params, "sample_dirichlet")
    draw = rng.generator.dirichlet(alpha, size=size)
    # tiny concentrations can underflow every gamma draw to zero
    bad = ~np.all(np.isfinite(draw), axis=-1)
    if np.any(bad):
        draw[bad] = np.eye(alpha.size)[int(np.argmax(alpha))]
    return draw


def sample_categorical(probs, rng: RngStream) -> int:
    p = _as_real_array(probs, "sample_categorical")
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise DomainError("sample_categorical requires a probability vector")
    return int(rng.generator.choice(p.size, p=p / p.sum()))


def sample_categorical_rows(probs: np.ndarray, rng: RngStream) -> np.ndarray:
    """One categorical draw per row of a row-stochastic matrix."""
    p = np.asarray(probs, dtype=float)
    cdf = np.cumsum(p, axis=1)
    u = rng.generator.random(p.shape[0]) * cdf[:, -1]
    return np.minimum((cdf <= u[:, None]).sum(axis=1), p.shape[1] - 1)


def sample_beta(a: float, b: float, rng: RngStream) -> float:
    _require_positive([a, b], "sample_beta")
    return float(rng.generator.beta(a, b))


def sample_row_log_normal(mean, cov: SpdMatrix, rng: RngStream, size: Optional[int] = None) -> np.ndarray:
    """exp of a multivariate normal draw; ``size`` stacks independent rows."""
    m = _as_real_array(mean, "sample_row_log_normal")
    if m.shape != (cov.dim,):
        raise DomainError(f"mean has shape {m.shape}, covariance is {cov.dim}x{cov.dim}")
    shape: Sequence[int] = (cov.dim,) if size is None else (size, cov.dim)
    z = rng.generator.standard_normal(shape)
    return np.exp(m + z @ cov.cholesky.T)


def apply_floor(values: np.ndarray, floor: float = POSITIVITY_FLOOR) -> np.ndarray:
    np.maximum(values, floor, out=values)
    return values
