"""Known hyper-parameters of the generative model."""
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from truthnet.config import get_settings
from truthnet.errors import DimensionMismatchError
from truthnet.inference.mathkernels import SpdMatrix


class Hyperparameters(BaseModel):
    """Priors of the community truth-discovery model.

    ``log_mean``/``log_cov`` parameterize the log-normal prior on every row of a
    community confusion matrix, ``alpha`` the Dirichlet weak limit of the
    community weights, ``g0``/``h0`` the Beta prior on the in-community link
    probability and ``epsilon`` the cross-community link probability.
    """
    alpha: float = Field(gt=0)
    g0: float = Field(gt=0)
    h0: float = Field(gt=0)
    log_mean: np.ndarray
    log_cov: SpdMatrix
    epsilon: float = Field(gt=0, lt=1)
    max_communities: int = Field(ge=1)
    num_states: int = Field(ge=2)

    class Config:
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def check_dimensions(self):
        self.log_mean = np.asarray(self.log_mean, dtype=float)
        if self.log_mean.shape != (self.num_states,) or self.log_cov.dim != self.num_states:
            raise DimensionMismatchError(
                f"log_mean {self.log_mean.shape} and log_cov dim {self.log_cov.dim} "
                f"must both match num_states={self.num_states}"
            )
        return self

    @classmethod
    def from_scalars(
        cls,
        num_states: int,
        alpha: Optional[float] = None,
        g0: Optional[float] = None,
        h0: Optional[float] = None,
        log_mean: Optional[float] = None,
        log_var: Optional[float] = None,
        epsilon: Optional[float] = None,
        max_communities: Optional[int] = None,
    ) -> "Hyperparameters":
        """Broadcast scalar M and V = v*I; missing values come from settings."""
        settings = get_settings()
        m = settings.log_mean if log_mean is None else log_mean
        v = settings.log_var if log_var is None else log_var
        return cls(
            alpha=settings.alpha if alpha is None else alpha,
            g0=settings.g0 if g0 is None else g0,
            h0=settings.h0 if h0 is None else h0,
            log_mean=np.full(num_states, float(m)),
            log_cov=SpdMatrix.isotropic(num_states, float(v)),
            epsilon=settings.epsilon if epsilon is None else epsilon,
            max_communities=settings.max_communities if max_communities is None else max_communities,
            num_states=num_states,
        )

    def to_summary(self) -> dict:
        return {
            "alpha": self.alpha,
            "g0": self.g0,
            "h0": self.h0,
            "log_mean": self.log_mean.tolist(),
            "log_cov": self.log_cov.entries.tolist(),
            "epsilon": self.epsilon,
            "max_communities": self.max_communities,
            "num_states": self.num_states,
        }
