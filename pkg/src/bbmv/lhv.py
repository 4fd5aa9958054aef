"""Local hidden-variable adversaries for the two-setting, two-outcome CHSH scenario.

A deterministic strategy fixes +/-1 responses to both settings on each wing.
In correlation space (E(a,b), E(a,b'), E(a',b), E(a',b')) the 16 strategies
collapse onto the 8 sign vectors of even parity, whose convex hull is cut
out by the box |E| <= 1 together with the eight CHSH facets s.E <= 2
(s a sign vector of odd parity).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .bell import PAIRS, WING1_LABELS, WING2_LABELS, chsh_combination, correlations, pair_label
from .errors import InvalidInputError, InvariantError
from .quantum import DensityMatrix, sample_outcomes


def _pair_key(key):
    if isinstance(key, str):
        key = tuple(part.strip() for part in key.split(","))
    key = tuple(key)
    if key not in PAIRS:
        raise InvalidInputError(f"unknown setting pair {key!r}")
    return key


@dataclass(frozen=True)
class CorrelationTable:
    e: Mapping

    def __post_init__(self):
        if not isinstance(self.e, Mapping):
            e = dict(zip(PAIRS, self.e))
        else:
            e = {_pair_key(k): v for k, v in self.e.items()}
        if set(e) != set(PAIRS):
            raise InvariantError("correlation table needs all four setting pairs")
        e = {p: float(e[p]) for p in PAIRS}
        for p, v in e.items():
            if not -1.0 - 1e-12 <= v <= 1.0 + 1e-12:
                raise InvariantError(f"correlation {pair_label(p)} = {v} outside [-1, 1]")
        object.__setattr__(self, "e", e)

    def values(self) -> np.ndarray:
        return np.array([self.e[p] for p in PAIRS])

    def chsh(self) -> float:
        return chsh_combination(self.values())

    def __getitem__(self, pair):
        return self.e[_pair_key(pair)]

    def to_dict(self) -> dict:
        return {pair_label(p): v for p, v in self.e.items()}

    @classmethod
    def from_dict(cls, d) -> CorrelationTable:
        return cls(d)

    @classmethod
    def from_state(cls, rho: DensityMatrix, q) -> CorrelationTable:
        return cls(correlations(rho, q))


@dataclass(frozen=True)
class LHVStrategy:
    response_1: Mapping
    response_2: Mapping

    def __post_init__(self):
        for resp, labels in ((self.response_1, WING1_LABELS), (self.response_2, WING2_LABELS)):
            if set(resp) != set(labels):
                raise InvariantError(f"response map must assign exactly {labels}")
            if any(v not in (1, -1) for v in resp.values()):
                raise InvariantError("responses must be +1 or -1")

    def outcomes(self, s1: str, s2: str) -> tuple:
        return self.response_1[s1], self.response_2[s2]

    def table(self) -> CorrelationTable:
        return CorrelationTable({p: self.response_1[p[0]] * self.response_2[p[1]] for p in PAIRS})


def enumerate_deterministic() -> list:
    """All 16 deterministic strategies; index 0 answers +1 everywhere."""
    out = []
    for ra, rap, rb, rbp in itertools.product((1, -1), repeat=4):
        out.append(LHVStrategy({"a": ra, "a_prime": rap}, {"b": rb, "b_prime": rbp}))
    return out


# Row k: responses (A(a), A(a'), B(b), B(b')) of strategy k.
RESPONSES = np.array(list(itertools.product((1, -1), repeat=4)), dtype=np.int8)
# Row k: correlation table of strategy k in PAIRS order.
VERTICES = np.stack([
    RESPONSES[:, 0] * RESPONSES[:, 2],
    RESPONSES[:, 0] * RESPONSES[:, 3],
    RESPONSES[:, 1] * RESPONSES[:, 2],
    RESPONSES[:, 1] * RESPONSES[:, 3],
], axis=1).astype(float)

CHSH_FACETS = np.array([s for s in itertools.product((1, -1), repeat=4) if np.prod(s) == -1], dtype=float)
_BOX = np.vstack([np.eye(4), -np.eye(4)])
# Full H-representation A x <= b of the local polytope in correlation space.
FACET_NORMALS = np.vstack([_BOX, CHSH_FACETS])
FACET_BOUNDS = np.concatenate([np.ones(8), np.full(8, 2.0)])


@dataclass(frozen=True)
class LHVMixture:
    weights: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (16,):
            raise InvariantError("a mixture needs exactly 16 weights")
        if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-10:
            raise InvariantError("mixture weights must be non-negative and sum to 1")
        object.__setattr__(self, "weights", tuple(float(max(0.0, x)) for x in w))

    @classmethod
    def point_mass(cls, index: int) -> LHVMixture:
        w = np.zeros(16)
        w[index] = 1.0
        return cls(tuple(w))

    @classmethod
    def uniform(cls) -> LHVMixture:
        return cls(tuple(np.full(16, 1 / 16)))

    @classmethod
    def random(cls, rng: np.random.Generator) -> LHVMixture:
        w = rng.dirichlet(np.ones(16))
        return cls(tuple(w / w.sum()))

    def table(self) -> CorrelationTable:
        values = np.asarray(self.weights) @ VERTICES
        return CorrelationTable(tuple(np.clip(values, -1.0, 1.0)))

    def chsh(self) -> float:
        return chsh_combination(np.asarray(self.weights) @ VERTICES)

    def to_dict(self) -> dict:
        return {"weights": list(self.weights)}

    @classmethod
    def from_dict(cls, d) -> LHVMixture:
        return cls(tuple(d["weights"]))


def lhv_max_chsh() -> float:
    return float(max(abs(s.table().chsh()) for s in enumerate_deterministic()))


def local_lhv_sample(mix: LHVMixture, s1, s2, rng: np.random.Generator) -> tuple:
    """One trial of a locally causal model. The strategy is drawn before the settings are read."""
    lam = sample_outcomes(mix.weights, rng)
    r = RESPONSES[lam]
    return int(r[_wing1_index(s1)]), int(r[2 + _wing2_index(s2)])


def setting_aware_lhv_sample(target, s1, s2, rng: np.random.Generator, quad=None) -> tuple:
    """One trial of a model whose hidden variable sees both settings.

    Marginals are uniform and the product has mean E(s1, s2) of ``target``,
    a CorrelationTable, or a DensityMatrix together with ``quad``.
    """
    table = _target_table(target, quad)
    e = table[(WING1_LABELS[_wing1_index(s1)], WING2_LABELS[_wing2_index(s2)])]
    o1 = 1 if rng.random() < 0.5 else -1
    o2 = o1 if rng.random() < (1 + e) / 2 else -o1
    return o1, o2


def _wing1_index(s) -> int:
    return WING1_LABELS.index(s) if isinstance(s, str) else int(s)


def _wing2_index(s) -> int:
    return WING2_LABELS.index(s) if isinstance(s, str) else int(s)


def _target_table(target, quad) -> CorrelationTable:
    if isinstance(target, CorrelationTable):
        return target
    if isinstance(target, DensityMatrix):
        if quad is None:
            raise InvalidInputError("a quantum target needs measurement settings")
        return CorrelationTable.from_state(target, quad)
    return CorrelationTable(target)


class LocalLHVModel:
    """Batch sampler for a mixture of deterministic strategies."""

    def __init__(self, mix: LHVMixture):
        self.mix = mix

    def sample(self, settings_1, settings_2, rng):
        lam = sample_outcomes(self.mix.weights, rng, size=len(settings_1))
        r = RESPONSES[lam]
        rows = np.arange(len(lam))
        return r[rows, settings_1], r[rows, 2 + np.asarray(settings_2)]

    def exact_correlations(self) -> dict:
        return dict(self.mix.table().e)


class SettingAwareLHVModel:
    """Batch sampler whose hidden variable is drawn knowing both settings."""

    def __init__(self, target, quad=None):
        self.target = target
        self.table = None if isinstance(target, DensityMatrix) and quad is None else _target_table(target, quad)

    def bind(self, quad) -> SettingAwareLHVModel:
        return self if self.table is not None else SettingAwareLHVModel(self.target, quad)

    def sample(self, settings_1, settings_2, rng):
        if self.table is None:
            raise InvalidInputError("bind measurement settings before sampling a quantum target")
        e = self.table.values().reshape(2, 2)[settings_1, settings_2]
        n = len(settings_1)
        o1 = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
        agree = rng.random(n) < (1 + e) / 2
        return o1, np.where(agree, o1, -o1).astype(np.int8)

    def exact_correlations(self) -> dict:
        return dict(self.table.e)


# -- best local fit -----------------------------------------------------------

def facet_residual(values: Sequence[float]) -> float:
    """Smallest max-norm distance from a box point to the local polytope.

    Inside the box at most one CHSH facet can be violated, and moving every
    coordinate by the same amount against that facet's normal stays inside
    the polytope, so the distance is the worst facet excess over 4.
    """
    t = np.asarray(values, dtype=float)
    return float(max(0.0, np.max(CHSH_FACETS @ t - 2.0) / 4.0))


def _closest_local_point(t: np.ndarray) -> np.ndarray:
    excess = CHSH_FACETS @ t - 2.0
    k = int(np.argmax(excess))
    if excess[k] <= 0:
        return t.copy()
    return t - excess[k] / 4.0 * CHSH_FACETS[k]


def decompose_local_point(x: Sequence[float], tol: float = 1e-12) -> np.ndarray:
    """Weights over the 16 strategies reproducing the correlation point ``x``.

    Repeatedly takes the lowest-index vertex of the smallest face holding the
    current point, shoots a ray from it through the point to the face
    boundary, and recurses on the boundary point. The face dimension drops
    at every step, so at most five vertices carry weight.
    """
    cur = np.asarray(x, dtype=float).copy()
    if np.any(FACET_NORMALS @ cur - FACET_BOUNDS > 1e-9):
        raise InvalidInputError("point lies outside the local polytope")
    weights = np.zeros(16)
    remaining = 1.0
    active = set(np.flatnonzero(FACET_BOUNDS - FACET_NORMALS @ cur <= tol))
    for _ in range(10):
        on_face = [j for j in range(16)
                   if all(FACET_NORMALS[c] @ VERTICES[j] == FACET_BOUNDS[c] for c in active)]
        v_idx = on_face[0]
        v = VERTICES[v_idx]
        distinct = {tuple(VERTICES[j]) for j in on_face}
        if len(distinct) == 1 or np.max(np.abs(cur - v)) <= tol:
            weights[v_idx] += remaining
            break
        d = cur - v
        rates = FACET_NORMALS @ d
        slack = FACET_BOUNDS - FACET_NORMALS @ cur
        candidates = [c for c in range(len(FACET_BOUNDS)) if c not in active and rates[c] > tol]
        steps = {c: max(0.0, slack[c]) / rates[c] for c in candidates}
        lam = min(steps.values())
        tight = {c for c, s in steps.items() if s <= lam + tol * (1 + lam)}
        weights[v_idx] += remaining * lam / (1 + lam)
        remaining /= 1 + lam
        cur = cur + lam * d
        active |= tight
    else:  # pragma: no cover - bounded by the face lattice depth
        raise InvariantError("vertex decomposition did not terminate")
    return weights / weights.sum()


def best_lhv_fit(target: CorrelationTable) -> tuple:
    """Local mixture minimizing the largest correlation deviation from ``target``.

    Among optimal mixtures the one whose table is Euclidean-closest to the
    target is chosen, decomposed lowest-index-first. Returns the mixture and
    its achieved max deviation.
    """
    if not isinstance(target, CorrelationTable):
        target = CorrelationTable(target)
    t = np.clip(target.values(), -1.0, 1.0)
    x = _closest_local_point(t)
    mix = LHVMixture(tuple(decompose_local_point(x)))
    residual = float(np.max(np.abs(np.asarray(mix.weights) @ VERTICES - target.values())))
    return mix, residual
