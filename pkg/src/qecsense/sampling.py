"""Finite-shot measurement records drawn from an outcome model."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .protocol import OutcomeModel
from .validation import check_positive_int, check_probability_vector, check_random_state_seed

__all__ = ["ExperimentData", "make_generator", "sample_experiment"]


@dataclass(frozen=True, eq=False)
class ExperimentData:
    """Counts of syndrome classes and of +-1 string outcomes within each class."""

    counts_k: np.ndarray
    counts_plus: np.ndarray
    counts_minus: np.ndarray
    m: int
    seed: int
    repetition: int = 0

    def __post_init__(self):
        for name in ("counts_k", "counts_plus", "counts_minus"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        if self.counts_k.sum() != self.m:
            raise ValueError("class counts must sum to the number of shots")
        if np.any(self.counts_plus + self.counts_minus != self.counts_k):
            raise ValueError("per-class +/- counts must add up to the class counts")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExperimentData):
            return NotImplemented
        return (
            (self.m, self.seed, self.repetition) == (other.m, other.seed, other.repetition)
            and np.array_equal(self.counts_k, other.counts_k)
            and np.array_equal(self.counts_plus, other.counts_plus)
            and np.array_equal(self.counts_minus, other.counts_minus)
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "counts_k": self.counts_k.tolist(),
            "counts_plus": self.counts_plus.tolist(),
            "counts_minus": self.counts_minus.tolist(),
            "m": int(self.m),
            "seed": int(self.seed),
            "repetition": int(self.repetition),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentData":
        return cls(
            counts_k=data["counts_k"],
            counts_plus=data["counts_plus"],
            counts_minus=data["counts_minus"],
            m=int(data["m"]),
            seed=int(data["seed"]),
            repetition=int(data.get("repetition", 0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentData":
        return cls.from_dict(json.loads(text))


def make_generator(seed: int, repetition: int = 0, stream: int = 0) -> np.random.Generator:
    """Independent counter-based stream for (seed, repetition, stream)."""
    seq = np.random.SeedSequence([check_random_state_seed(seed), int(repetition), int(stream)])
    return np.random.Generator(np.random.Philox(seq))


def sample_experiment(model: OutcomeModel, m: int, seed: int, repetition: int = 0,
                      stream: int = 0) -> ExperimentData:
    """Draw m shots: k by inverse-CDF sampling of p, then +-1 from q_{k,+}."""
    m = check_positive_int(m, "m")
    p = check_probability_vector(model.p, "p")
    rng = make_generator(seed, repetition, stream)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    # draw order is part of the reproducibility contract: all k first, then all signs
    cls = np.searchsorted(cdf, rng.random(m), side="right")
    cls = np.minimum(cls, p.size - 1)
    plus = rng.random(m) < np.asarray(model.q_plus, dtype=float)[cls]
    counts_k = np.bincount(cls, minlength=p.size)
    counts_plus = np.bincount(cls[plus], minlength=p.size)
    return ExperimentData(counts_k, counts_plus, counts_k - counts_plus, m, int(seed), int(repetition))
