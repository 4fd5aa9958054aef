"""CHSH test on the photon pair: exact values, optimal settings, sampled trials.

Measurement directions lie in the x-z Bloch plane; a setting with angle t
measures cos(t) sigma_z + sin(t) sigma_x. The CHSH combination is

    S = E(a, b) - E(a, b') + E(a', b) + E(a', b').
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientDataError, InvalidInputError, InvariantError
from .quantum import (
    IDENTITY2,
    SIGMA_X,
    SIGMA_Z,
    DensityMatrix,
    Observable,
    sample_outcomes,
)

WING1_LABELS = ("a", "a_prime")
WING2_LABELS = ("b", "b_prime")
PAIRS = (("a", "b"), ("a", "b_prime"), ("a_prime", "b"), ("a_prime", "b_prime"))
CHSH_SIGNS = (1, -1, 1, 1)
TSIRELSON = 2 * math.sqrt(2)
LOCAL_BOUND = 2.0

HOEFFDING_FORMULA = "p = min(1, 2*exp(-(|S|-2)^2 / (2*sum_k 1/n_k))) for |S| > 2, else 1"

GRID_STEP = math.pi / 60
REFINE_STEP = 1e-6
BLOCK_SIZE = 1 << 16


def pair_label(pair) -> str:
    return f"{pair[0]},{pair[1]}"


@dataclass(frozen=True)
class MeasurementSetting:
    angle: float

    def __post_init__(self):
        if not math.isfinite(self.angle):
            raise InvariantError(f"setting angle must be finite, got {self.angle!r}")

    def matrix(self) -> np.ndarray:
        return math.cos(self.angle) * SIGMA_Z + math.sin(self.angle) * SIGMA_X

    def observable(self) -> Observable:
        return Observable(self.matrix())


def _setting(s) -> MeasurementSetting:
    return s if isinstance(s, MeasurementSetting) else MeasurementSetting(float(s))


@dataclass(frozen=True)
class SettingsQuad:
    a: MeasurementSetting
    a_prime: MeasurementSetting
    b: MeasurementSetting
    b_prime: MeasurementSetting

    def __post_init__(self):
        for name in ("a", "a_prime", "b", "b_prime"):
            object.__setattr__(self, name, _setting(getattr(self, name)))

    @classmethod
    def from_angles(cls, a, a_prime, b, b_prime) -> SettingsQuad:
        return cls(a, a_prime, b, b_prime)

    def angles(self) -> tuple:
        return (self.a.angle, self.a_prime.angle, self.b.angle, self.b_prime.angle)

    def wing1(self, index: int) -> MeasurementSetting:
        return (self.a, self.a_prime)[index]

    def wing2(self, index: int) -> MeasurementSetting:
        return (self.b, self.b_prime)[index]

    def to_dict(self) -> dict:
        return dict(zip(("a", "a_prime", "b", "b_prime"), self.angles()))


def standard_quad() -> SettingsQuad:
    """Angles reaching 2 sqrt(2) in magnitude on the singlet."""
    return SettingsQuad(0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)


def _correlation_tensor(rho: DensityMatrix) -> np.ndarray:
    """T[i, j] = Tr(rho sigma_i (x) sigma_j) for i, j over (z, x)."""
    paulis = (SIGMA_Z, SIGMA_X)
    return np.array([[np.trace(rho.entries @ np.kron(p, q)).real for q in paulis] for p in paulis])


def _direction(angles) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    return np.stack([np.cos(angles), np.sin(angles)], axis=-1)


def correlation(rho: DensityMatrix, s1, s2) -> float:
    """E = Tr(rho A(s1) (x) B(s2))."""
    if rho.dim != 4:
        raise InvalidInputError("correlation needs a two-qubit state")
    op = np.kron(_setting(s1).matrix(), _setting(s2).matrix())
    return float(np.trace(rho.entries @ op).real)


def correlations(rho: DensityMatrix, q: SettingsQuad) -> dict:
    return {pair: correlation(rho, getattr(q, pair[0]), getattr(q, pair[1])) for pair in PAIRS}


def chsh_combination(values: Sequence[float]) -> float:
    """CHSH combination of four correlations given in PAIRS order."""
    return float(sum(sign * v for sign, v in zip(CHSH_SIGNS, values)))


def chsh_value(rho: DensityMatrix, q: SettingsQuad) -> float:
    if rho.dim != 4:
        raise InvalidInputError("CHSH needs a two-qubit state")
    e = correlations(rho, q)
    return chsh_combination([e[p] for p in PAIRS])


def _chsh_from_tensor(t: np.ndarray, angles) -> float:
    a, ap, b, bp = _direction(angles)
    return float(a @ t @ b - a @ t @ bp + ap @ t @ b + ap @ t @ bp)


def optimize_settings(rho: DensityMatrix) -> tuple:
    """Settings maximizing |S|, and the maximal value.

    A grid of step pi/60 with a = 0 seeds a coordinate pattern search over
    all four angles whose step is halved down to 1e-6. The returned quad is
    oriented so that S itself is non-negative.
    """
    if rho.dim != 4:
        raise InvalidInputError("optimize_settings needs a two-qubit state")
    t = _correlation_tensor(rho)
    grid = np.arange(120) * GRID_STEP
    dirs = _direction(grid)
    e0 = _direction(0.0) @ t @ dirs.T          # E(a=0, b) for each grid b
    e1 = dirs @ t @ dirs.T                     # E(a', b)
    s = (e0[None, :, None] - e0[None, None, :] + e1[:, :, None] + e1[:, None, :])
    k = np.unravel_index(np.argmax(np.abs(s)), s.shape)
    best = np.array([0.0, grid[k[0]], grid[k[1]], grid[k[2]]])
    best_val = abs(_chsh_from_tensor(t, best))

    step = GRID_STEP
    while step >= REFINE_STEP:
        improved = False
        for i in range(4):
            for delta in (step, -step):
                trial = best.copy()
                trial[i] += delta
                val = abs(_chsh_from_tensor(t, trial))
                if val > best_val:
                    best, best_val, improved = trial, val, True
                    break
        if not improved:
            step /= 2

    if _chsh_from_tensor(t, best) < 0:
        best[2:] += math.pi
    best = np.mod(best, 2 * math.pi)
    quad = SettingsQuad(*best)
    return quad, abs(chsh_value(rho, quad))


# -- sampled trials ---------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    setting_1: str
    setting_2: str
    outcome_1: int | None
    outcome_2: int | None
    detected: bool

    def __post_init__(self):
        if self.detected != (self.outcome_1 is not None and self.outcome_2 is not None):
            raise InvariantError("outcomes must be present exactly when the trial is detected")
        if self.detected and (self.outcome_1 not in (1, -1) or self.outcome_2 not in (1, -1)):
            raise InvariantError("outcomes must be +1 or -1")
        if self.setting_1 not in WING1_LABELS or self.setting_2 not in WING2_LABELS:
            raise InvariantError("unknown setting label")


class TrialRecords:
    """Column-oriented sequence of TrialRecord.

    Outcomes of undetected trials are stored as 0 and surface as None.
    """

    def __init__(self, setting_1, setting_2, outcome_1, outcome_2, detected):
        self.setting_1 = np.asarray(setting_1, dtype=np.int8)
        self.setting_2 = np.asarray(setting_2, dtype=np.int8)
        self.detected = np.asarray(detected, dtype=bool)
        self.outcome_1 = np.where(self.detected, np.asarray(outcome_1, dtype=np.int8), 0).astype(np.int8)
        self.outcome_2 = np.where(self.detected, np.asarray(outcome_2, dtype=np.int8), 0).astype(np.int8)
        n = self.detected.size
        if not all(a.shape == (n,) for a in (self.setting_1, self.setting_2, self.outcome_1, self.outcome_2)):
            raise InvariantError("record columns must be 1-d and of equal length")

    @classmethod
    def from_records(cls, records: Iterable[TrialRecord]) -> TrialRecords:
        records = list(records)
        return cls(
            [WING1_LABELS.index(r.setting_1) for r in records],
            [WING2_LABELS.index(r.setting_2) for r in records],
            [r.outcome_1 or 0 for r in records],
            [r.outcome_2 or 0 for r in records],
            [r.detected for r in records],
        )

    @classmethod
    def concatenate(cls, parts: Sequence[TrialRecords]) -> TrialRecords:
        cols = ("setting_1", "setting_2", "outcome_1", "outcome_2", "detected")
        return cls(*(np.concatenate([getattr(p, c) for p in parts]) for c in cols))

    def __len__(self):
        return self.detected.size

    def __getitem__(self, i: int) -> TrialRecord:
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i = i % len(self)
        det = bool(self.detected[i])
        return TrialRecord(
            i,
            WING1_LABELS[self.setting_1[i]],
            WING2_LABELS[self.setting_2[i]],
            int(self.outcome_1[i]) if det else None,
            int(self.outcome_2[i]) if det else None,
            det,
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __eq__(self, other):
        if not isinstance(other, TrialRecords):
            return NotImplemented
        return all(np.array_equal(getattr(self, c), getattr(other, c))
                   for c in ("setting_1", "setting_2", "outcome_1", "outcome_2", "detected"))


_OUTCOME_PAIRS = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=np.int8)


def born_probabilities(rho: DensityMatrix, s1, s2) -> np.ndarray:
    """Joint outcome probabilities in the order (+,+), (+,-), (-,+), (-,-)."""
    a, b = _setting(s1).matrix(), _setting(s2).matrix()
    probs = []
    for o1, o2 in _OUTCOME_PAIRS:
        proj = np.kron((IDENTITY2 + o1 * a) / 2, (IDENTITY2 + o2 * b) / 2)
        probs.append(np.trace(rho.entries @ proj).real)
    p = np.clip(np.array(probs), 0.0, None)
    return p / p.sum()


class QuantumModel:
    """Born-rule sampler for joint outcomes on a two-qubit state."""

    def __init__(self, rho: DensityMatrix, q: SettingsQuad):
        self.rho = rho
        self.quad = q
        self.probs = np.array([[born_probabilities(rho, q.wing1(i), q.wing2(j)) for j in (0, 1)]
                               for i in (0, 1)])

    def sample(self, settings_1, settings_2, rng):
        n = len(settings_1)
        out = np.zeros((n, 2), dtype=np.int8)
        for i in (0, 1):
            for j in (0, 1):
                mask = (settings_1 == i) & (settings_2 == j)
                idx = sample_outcomes(self.probs[i, j], rng, size=int(mask.sum()))
                out[mask] = _OUTCOME_PAIRS[idx]
        return out[:, 0], out[:, 1]

    def exact_correlations(self) -> dict:
        return correlations(self.rho, self.quad)


def _sampler(model, q: SettingsQuad):
    if isinstance(model, DensityMatrix):
        if model.dim != 4:
            raise InvalidInputError("quantum outcome model needs a two-qubit state")
        return QuantumModel(model, q)
    if hasattr(model, "bind"):
        return model.bind(q)
    if hasattr(model, "sample"):
        return model
    raise InvalidInputError(f"unsupported outcome model {type(model).__name__}")


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _run_block(sampler, seed, block, size, detection_prob):
    rng = _block_rng(seed, block)
    s1 = rng.integers(0, 2, size=size)
    s2 = rng.integers(0, 2, size=size)
    detected = rng.random(size) < detection_prob
    o1, o2 = sampler.sample(s1, s2, rng)
    return TrialRecords(s1, s2, o1, o2, detected)


def run_trials(model, q: SettingsQuad, n: int, seed: int, detection_prob: float = 1.0,
               workers: int = 1, block_size: int = BLOCK_SIZE) -> TrialRecords:
    """Simulate ``n`` trials with uniformly random settings on each wing.

    ``model`` is a two-qubit DensityMatrix (Born-rule outcomes) or an LHV
    sampler. Trials are generated in fixed-size blocks, each with its own
    stream derived from ``(seed, block index)``, so the result does not
    depend on ``workers``.
    """
    if n < 1:
        raise InvalidInputError("need at least one trial")
    if not 0.0 <= detection_prob <= 1.0:
        raise InvalidInputError("detection probability must lie in [0, 1]")
    sampler = _sampler(model, q)
    sizes = [min(block_size, n - start) for start in range(0, n, block_size)]
    jobs = [(sampler, seed, k, size, detection_prob) for k, size in enumerate(sizes)]
    if workers <= 1 or len(jobs) == 1:
        parts = [_run_block(*job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _run_block(*job), jobs))
    return TrialRecords.concatenate(parts)


@dataclass(frozen=True)
class CHSHEstimate:
    s_value: float
    standard_error: float
    per_pair_counts: tuple
    p_value_local: float
    per_pair_means: tuple = ()
    per_pair_stderr: tuple = ()
    total_trials: int = 0

    def __post_init__(self):
        if abs(self.s_value) > 4 + 1e-12:
            raise InvariantError(f"|S| = {abs(self.s_value)} exceeds the algebraic maximum 4")
        if self.standard_error < 0 or not 0.0 <= self.p_value_local <= 1.0:
            raise InvariantError("invalid standard error or p-value")

    @property
    def detected_trials(self) -> int:
        return int(sum(self.per_pair_counts))

    @property
    def detection_rate(self) -> float:
        return self.detected_trials / self.total_trials if self.total_trials else 0.0

    def to_dict(self) -> dict:
        return {
            "s_value": self.s_value,
            "standard_error": self.standard_error,
            "per_pair_counts": list(self.per_pair_counts),
            "p_value_local": self.p_value_local,
            "per_pair_means": list(self.per_pair_means),
            "per_pair_stderr": list(self.per_pair_stderr),
            "total_trials": self.total_trials,
        }

    @classmethod
    def from_dict(cls, d: dict) -> CHSHEstimate:
        return cls(d["s_value"], d["standard_error"], tuple(d["per_pair_counts"]), d["p_value_local"],
                   tuple(d.get("per_pair_means", ())), tuple(d.get("per_pair_stderr", ())),
                   d.get("total_trials", 0))


def hoeffding_p_value(s_value: float, counts: Sequence[int]) -> float:
    """Bound on P(|S_hat| >= |s_value|) for any model with |S| <= 2.

    Each pair mean averages n_k independent products in [-1, 1], so the
    CHSH estimator is a sum of independent terms of range 2/n_k.
    """
    excess = abs(s_value) - LOCAL_BOUND
    if excess <= 0:
        return 1.0
    inv = sum(1.0 / n for n in counts)
    return float(min(1.0, 2.0 * math.exp(-excess ** 2 / (2.0 * inv))))


def estimate_chsh(records) -> CHSHEstimate:
    """Finite-sample CHSH estimate from detected trials only."""
    if not isinstance(records, TrialRecords):
        records = TrialRecords.from_records(records)
    products = records.outcome_1.astype(np.int64) * records.outcome_2
    counts, means, errs = [], [], []
    for pair in PAIRS:
        i, j = WING1_LABELS.index(pair[0]), WING2_LABELS.index(pair[1])
        mask = records.detected & (records.setting_1 == i) & (records.setting_2 == j)
        n = int(mask.sum())
        if n == 0:
            raise InsufficientDataError(f"no detected trials for setting pair ({pair_label(pair)})", pair)
        mean = int(products[mask].sum()) / n
        counts.append(n)
        means.append(mean)
        errs.append(math.sqrt(max(0.0, 1.0 - mean * mean) / n))
    s = chsh_combination(means)
    se = math.sqrt(sum(e * e for e in errs))
    return CHSHEstimate(s, se, tuple(counts), hoeffding_p_value(s, counts),
                        tuple(means), tuple(errs), len(records))
