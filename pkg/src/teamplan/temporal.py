"""Normal-Inverse-Gamma beliefs over human task durations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

DURATION_FLOOR = 0.1  # seconds; Gaussian draws are clipped here


@dataclass(frozen=True)
class NIGParams:
    """Hyperparameters of one task's belief over (mean, variance)."""

    mu0: float   # location of the mean belief, seconds
    nu: float    # pseudo-count / precision scale
    alpha: float # inverse-gamma shape (> 1 so the variance estimate exists)
    beta: float  # inverse-gamma scale

    def __post_init__(self):
        if self.nu <= 0 or self.beta <= 0:
            raise ValueError("nu and beta must be positive")
        if self.alpha <= 1:
            raise ValueError("alpha must exceed 1")
        if self.mu0 <= 0:
            raise ValueError("duration estimate must be positive")


def prior_from_nominal(nominal_seconds: float, rel_sd: float = 0.25) -> NIGParams:
    """Weakly informative prior: nu=1, alpha=2, scale set so the variance
    point-estimate gives sd = rel_sd * nominal."""
    if nominal_seconds <= 0:
        raise ValueError("nominal duration must be positive")
    alpha = 2.0
    beta = (rel_sd * nominal_seconds) ** 2 * (alpha - 1.0)
    return NIGParams(mu0=nominal_seconds, nu=1.0, alpha=alpha, beta=beta)


class TemporalModel:
    """Per-task NIG beliefs; updates return a new model (values are immutable)."""

    def __init__(self, params: Mapping[int, NIGParams]):
        self.params = dict(params)

    def copy(self) -> "TemporalModel":
        return TemporalModel(self.params)

    def update(self, task: int, observed_duration: float) -> "TemporalModel":
        """Single-observation conjugate update for one task."""
        if observed_duration <= 0:
            raise ValueError("observed duration must be positive")
        p = self.params[task]
        d = observed_duration
        new = NIGParams(
            mu0=(p.nu * p.mu0 + d) / (p.nu + 1.0),
            nu=p.nu + 1.0,
            alpha=p.alpha + 0.5,
            beta=p.beta + p.nu * (d - p.mu0) ** 2 / (2.0 * (p.nu + 1.0)),
        )
        out = dict(self.params)
        out[task] = new
        return TemporalModel(out)

    def point_estimates(self, task: int) -> tuple[float, float]:
        """Posterior-mean duration and variance: (mu0, beta/(alpha-1))."""
        p = self.params[task]
        if p.alpha <= 1:
            raise ValueError("alpha must exceed 1 for the variance estimate")
        return p.mu0, p.beta / (p.alpha - 1.0)

    def mu_hat(self, tasks: Iterable[int] | None = None) -> dict[int, float]:
        tasks = self.params.keys() if tasks is None else tasks
        return {t: self.params[t].mu0 for t in tasks}

    def sample_durations(self, tasks: Iterable[int], rng: np.random.Generator,
                         size: int | None = None) -> dict[int, np.ndarray] | dict[int, float]:
        """Independent Gaussian draws per task, floored at DURATION_FLOOR.

        With size=None returns one float per task, else an array of draws.
        """
        out = {}
        for t in tasks:
            mu, var = self.point_estimates(t)
            draws = rng.normal(mu, np.sqrt(var), size=size)
            out[t] = np.maximum(DURATION_FLOOR, draws) if size is not None \
                else float(max(DURATION_FLOOR, draws))
        return out

    def state_hash(self) -> str:
        import hashlib
        h = hashlib.sha256()
        for t in sorted(self.params):
            p = self.params[t]
            h.update(f"{t}:{p.mu0!r}:{p.nu!r}:{p.alpha!r}:{p.beta!r};".encode())
        return h.hexdigest()[:16]

    def to_jsonable(self) -> dict:
        return {str(t): [p.mu0, p.nu, p.alpha, p.beta]
                for t, p in sorted(self.params.items())}

    @staticmethod
    def from_jsonable(d: Mapping) -> "TemporalModel":
        return TemporalModel({int(t): NIGParams(*vals) for t, vals in d.items()})
