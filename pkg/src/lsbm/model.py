"""Model parameters and the closed-form per-label quantities.

A labelled SBM is described by the connectivity pair ``(a, b)`` and two
label distributions: ``mu`` for edges inside a block and ``nu`` for edges
across blocks. Everything else (flip probabilities, channel parameters,
observed label law, the threshold ``tau``) is derived from those four
values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

PROB_TOL = 1e-9
ROUNDOFF_TOL = 1e-12


class ModelError(ValueError):
    """Invalid model parameters."""


@dataclass(frozen=True)
class LabelSet:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(l) for l in self.labels)
        if not labels:
            raise ModelError("label set is empty")
        if len(set(labels)) != len(labels):
            raise ModelError(f"duplicate labels in {labels}")
        for l in labels:
            if not l or any(c.isspace() for c in l):
                raise ModelError(f"label {l!r} is empty or contains whitespace")
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(label) from None


@dataclass(frozen=True)
class LabelDistribution:
    """Probability vector over a :class:`LabelSet`.

    Sums within ``PROB_TOL`` of one are renormalized; anything further off
    is rejected.
    """

    labels: LabelSet
    probs: tuple[float, ...]

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (len(self.labels),):
            raise ModelError(
                f"expected {len(self.labels)} probabilities, got {probs.shape}")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise ModelError(f"probabilities must be finite and >= 0: {probs}")
        total = float(probs.sum())
        if abs(total - 1.0) > PROB_TOL:
            raise ModelError(f"probabilities sum to {total!r}, not 1")
        # leave pure summation round-off alone so equal entries of mu and nu stay equal
        if abs(total - 1.0) > ROUNDOFF_TOL:
            probs = probs / total
        object.__setattr__(self, "probs", tuple(float(p) for p in probs))

    @classmethod
    def from_mapping(cls, labels: LabelSet, probs: Mapping[str, float]):
        if set(probs) != set(labels.labels):
            raise ModelError(
                f"distribution domain {sorted(probs)} != label set {list(labels)}")
        return cls(labels, tuple(probs[l] for l in labels))

    def __getitem__(self, label: str) -> float:
        return self.probs[self.labels.index(label)]

    def as_array(self) -> np.ndarray:
        return np.array(self.probs)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.probs))


@dataclass(frozen=True)
class ModelParams:
    a: float
    b: float
    mu: LabelDistribution
    nu: LabelDistribution

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < 0:
            raise ModelError(f"need finite a, b >= 0, got a={a}, b={b}")
        if a + b <= 0:
            raise ModelError("need a + b > 0")
        if self.mu.labels != self.nu.labels:
            raise ModelError("mu and nu must share one label set")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def build(cls, a: float, b: float, labels: Sequence[str],
              mu: Sequence[float], nu: Sequence[float]) -> "ModelParams":
        ls = LabelSet(tuple(labels))
        return cls(a, b, LabelDistribution(ls, tuple(mu)), LabelDistribution(ls, tuple(nu)))

    @classmethod
    def unlabelled(cls, a: float, b: float) -> "ModelParams":
        """Single-label model, equivalent to the plain two-block SBM."""
        return cls.build(a, b, ["*"], [1.0], [1.0])

    @classmethod
    def two_label(cls, a: float, b: float, eps: float) -> "ModelParams":
        """Labels ``+``/``-`` with mu(+) = 1/2 + eps and nu(+) = 1/2 - eps."""
        if not 0.0 <= eps <= 0.5:
            raise ModelError(f"eps must lie in [0, 1/2], got {eps}")
        return cls.build(a, b, ["+", "-"], [0.5 + eps, 0.5 - eps], [0.5 - eps, 0.5 + eps])

    @property
    def labels(self) -> LabelSet:
        return self.mu.labels

    @property
    def mean_degree(self) -> float:
        return (self.a + self.b) / 2

    lam = mean_degree

    def same_weights(self) -> np.ndarray:
        """``a * mu(l)`` per label."""
        return self.a * self.mu.as_array()

    def cross_weights(self) -> np.ndarray:
        """``b * nu(l)`` per label."""
        return self.b * self.nu.as_array()

    def relabel(self, mapping: Mapping[str, str]) -> "ModelParams":
        """Rename labels (order of the label set is preserved)."""
        new = [mapping.get(l, l) for l in self.labels]
        return ModelParams.build(self.a, self.b, new, self.mu.probs, self.nu.probs)


@dataclass(frozen=True)
class LabelRecord:
    label: str
    eps: float
    theta: float
    obs_prob: float
    weight: float
    reachable: bool


@dataclass(frozen=True)
class LabelQuantities:
    records: tuple[LabelRecord, ...]

    def __getitem__(self, label: str) -> LabelRecord:
        for r in self.records:
            if r.label == label:
                return r
        raise KeyError(label)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    @property
    def eps(self) -> np.ndarray:
        return np.array([r.eps for r in self.records])

    @property
    def theta(self) -> np.ndarray:
        return np.array([r.theta for r in self.records])

    @property
    def obs_prob(self) -> np.ndarray:
        return np.array([r.obs_prob for r in self.records])

    @property
    def weight(self) -> np.ndarray:
        return np.array([r.weight for r in self.records])

    @property
    def reachable(self) -> np.ndarray:
        return np.array([r.reachable for r in self.records])


def derive_label_quantities(params: ModelParams) -> LabelQuantities:
    """Flip probability, channel parameter, observation law and weight per label.

    A label with ``a*mu + b*nu == 0`` is never observed; it gets eps = 1/2,
    theta = 0, weight = -inf and ``reachable=False``.
    """
    same = params.same_weights()
    cross = params.cross_weights()
    total = params.a + params.b
    records = []
    for l, s, c in zip(params.labels, same, cross):
        w = s + c
        if w > 0:
            eps = c / w
            theta = (s - c) / w
            reachable = True
        else:
            eps, theta, reachable = 0.5, 0.0, False
        weight = math.log(abs(theta)) if theta != 0 else -math.inf
        records.append(LabelRecord(l, float(eps), float(theta), float(w / total),
                                   weight, reachable))
    return LabelQuantities(tuple(records))


def observed_label_dist(params: ModelParams) -> LabelDistribution:
    """Law of the label on a uniformly chosen edge: (a mu + b nu) / (a + b)."""
    m = (params.same_weights() + params.cross_weights()) / (params.a + params.b)
    return LabelDistribution(params.labels, tuple(m))


def theta_sq_mean(params: ModelParams) -> float:
    """E[theta^2] under the observed label law (equals tau / lambda)."""
    q = derive_label_quantities(params)
    return float(np.sum(q.obs_prob * q.theta ** 2))


def tau(params: ModelParams) -> float:
    """Detectability threshold functional; reconstruction is conjectured feasible iff > 1."""
    return params.mean_degree * theta_sq_mean(params)


def unlabelled_condition(a: float, b: float) -> bool:
    """``(a - b)^2 > 2(a + b)``, the classical two-block detectability condition."""
    if a < 0 or b < 0 or a + b <= 0:
        raise ModelError(f"need a, b >= 0 and a + b > 0, got a={a}, b={b}")
    return (a - b) ** 2 > 2 * (a + b)
