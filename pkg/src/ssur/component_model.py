"""Independent binary component models (IID and INID Bernoulli inputs)."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_count, check_probabilities, check_probability, check_state


@dataclass(frozen=True, eq=False)
class ComponentModel:
    """Per-component failure probabilities of independent binary components.

    ``probs[i]`` is the probability that component ``i`` fails (state 1).
    Entries equal to 0 or 1 are allowed; such components are treated as
    deterministically safe or failed by the samplers.
    """

    probs: np.ndarray
    log_p: np.ndarray = field(init=False, repr=False)
    log_q: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        probs = check_probabilities(self.probs).copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        with np.errstate(divide="ignore"):
            log_p = np.log(probs)
            log_q = np.log1p(-probs)
        log_p.setflags(write=False)
        log_q.setflags(write=False)
        object.__setattr__(self, "log_p", log_p)
        object.__setattr__(self, "log_q", log_q)

    @property
    def n(self):
        return self.probs.shape[0]

    @property
    def is_iid(self):
        return bool(np.all(self.probs == self.probs[0]))

    @property
    def forced_failed(self):
        return np.flatnonzero(self.probs == 1.0)

    @property
    def forced_safe(self):
        return np.flatnonzero(self.probs == 0.0)

    def log_odds(self, index):
        """Log of p/(1-p) for components strictly inside (0, 1)."""
        return self.log_p[index] - self.log_q[index]

    def digest(self):
        return hashlib.sha256(self.probs.tobytes()).hexdigest()

    def to_dict(self):
        return {"probs": self.probs.tolist()}

    def __eq__(self, other):
        if not isinstance(other, ComponentModel):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __len__(self):
        return self.n


def iid_model(n, p):
    """All ``n`` components fail independently with probability ``p``."""
    n = check_count(n, "n", minimum=1)
    p = check_probability(p)
    return ComponentModel(np.full(n, p))


def inid_model(probs):
    return ComponentModel(np.asarray(probs, dtype=float))


def poisson_rate_model(lengths, rate):
    """Failure probabilities of pipes whose damage follows a Poisson process.

    A pipe of length ``l`` fails when at least one damage event falls on it,
    so ``p = 1 - exp(-rate * l)``.
    """
    lengths = np.asarray(lengths, dtype=float)
    if lengths.ndim != 1 or lengths.size == 0:
        raise ValueError("lengths must be a non-empty 1-d sequence")
    if np.any(lengths < 0) or not np.all(np.isfinite(lengths)):
        raise ValueError("lengths must be finite and non-negative")
    if not np.isfinite(rate) or rate < 0:
        raise ValueError(f"rate must be finite and non-negative, got {rate!r}")
    return ComponentModel(-np.expm1(-float(rate) * lengths))


def log_state_probability(model, x):
    x = check_state(x, model.n)
    with np.errstate(invalid="ignore"):
        terms = np.where(x, model.log_p, model.log_q)
    return float(np.sum(terms))


def state_probability(model, x):
    """Probability mass of the binary state ``x`` (True = failed)."""
    return float(np.exp(log_state_probability(model, x)))
