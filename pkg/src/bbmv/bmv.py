"""Gravitational entanglement of two spin-1/2 masses.

Each particle starts in (|0> + |1>)/sqrt(2) with spin 0 tied to the left
path and spin 1 to the right path. During the fall every joint branch
(LL, LR, RL, RR) picks up the Newtonian phase G m1 m2 t / (hbar d), and
inter-branch coherences decay uniformly at the dephasing rate.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import InvalidInputError, InvariantError, NoSolutionError
from .quantum import (
    DensityMatrix,
    HADAMARD,
    SIGMA_X,
    SIGMA_Z,
    apply_unitary,
    fidelity,
    negativity,
    partial_trace,
    singlet,
    tensor,
)
from .reports import FAIL, PASS, CheckResult

BRANCHES = ("LL", "LR", "RL", "RR")

G_NEWTON = 6.674e-11
HBAR = 1.054571817e-34

CONDITION1_NEGATIVITY_TOL = 1e-10
CONDITION1_FACTORIZATION_TOL = 1e-9


@dataclass(frozen=True)
class BMVConfig:
    """Masses (kg), fall time (s), branch separations (m) and dephasing rate (1/s)."""

    mass1: float
    mass2: float
    fall_time: float
    branch_distance: Mapping[str, float]
    dephasing_rate: float = 0.0
    gravitational_constant: float = G_NEWTON
    reduced_planck: float = HBAR

    def __post_init__(self):
        dist = {b: float(self.branch_distance[b]) for b in BRANCHES if b in self.branch_distance}
        missing = set(BRANCHES) - set(dist)
        extra = set(self.branch_distance) - set(BRANCHES)
        if missing or extra:
            raise InvariantError(f"branch_distance needs exactly {BRANCHES}; missing {sorted(missing)}, extra {sorted(extra)}")
        object.__setattr__(self, "branch_distance", dist)
        for name in ("mass1", "mass2", "gravitational_constant", "reduced_planck"):
            if not getattr(self, name) > 0:
                raise InvariantError(f"{name} must be positive")
        if not all(d > 0 for d in dist.values()):
            raise InvariantError("branch distances must be positive")
        # zero is allowed so that the no-evolution limit can be evaluated
        if not self.fall_time >= 0:
            raise InvariantError("fall_time must be non-negative")
        if not self.dephasing_rate >= 0:
            raise InvariantError("dephasing_rate must be non-negative")

    @classmethod
    def symmetric(cls, mass: float, fall_time: float, distance: float, **kw) -> BMVConfig:
        return cls(mass, mass, fall_time, {b: distance for b in BRANCHES}, **kw)

    def to_dict(self) -> dict:
        return {
            "mass1": self.mass1,
            "mass2": self.mass2,
            "fall_time": self.fall_time,
            "branch_distance": dict(self.branch_distance),
            "dephasing_rate": self.dephasing_rate,
            "gravitational_constant": self.gravitational_constant,
            "reduced_planck": self.reduced_planck,
        }


def default_bmv_config() -> BMVConfig:
    """Asymmetric geometry in the usual regime: the LR pair passes closest."""
    return BMVConfig(
        mass1=1e-14,
        mass2=1e-14,
        fall_time=2.5,
        branch_distance={"LL": 250e-6, "LR": 100e-6, "RL": 250e-6, "RR": 250e-6},
    )


@dataclass(frozen=True)
class StageOneOutcome:
    state: DensityMatrix
    entangling_phase: float
    singlet_fidelity: float
    witness_value: float

    def summary(self) -> dict:
        return {
            "entangling_phase": self.entangling_phase,
            "singlet_fidelity": self.singlet_fidelity,
            "witness_value": self.witness_value,
            "negativity": negativity(self.state),
        }


def _phase_rate(cfg: BMVConfig) -> float:
    return cfg.gravitational_constant * cfg.mass1 * cfg.mass2 / cfg.reduced_planck


def branch_phases(cfg: BMVConfig) -> dict:
    k = _phase_rate(cfg) * cfg.fall_time
    return {b: k / cfg.branch_distance[b] for b in BRANCHES}


def entangling_phase(cfg: BMVConfig) -> float:
    phi = branch_phases(cfg)
    return phi["LR"] + phi["RL"] - phi["LL"] - phi["RR"]


def _diag_phase(theta: float) -> np.ndarray:
    return np.diag([1.0, np.exp(-1j * theta)])


# Maps (|00> + |01> + |10> - |11>)/2, the ideal output once the local
# single-branch phases are removed, onto the singlet.
_FIXED_CORRECTION = np.kron(SIGMA_Z, SIGMA_X @ HADAMARD)


def corrective_unitary(cfg: BMVConfig) -> np.ndarray:
    """Product of local unitaries applied after the fall.

    The diagonal factors cancel the phases that depend on one particle's
    path only; these are known from the geometry. The fixed factor then
    takes the ideal pi-phase state to the singlet.
    """
    phi = branch_phases(cfg)
    local = np.kron(_diag_phase(phi["RL"] - phi["LL"]), _diag_phase(phi["LR"] - phi["LL"]))
    return _FIXED_CORRECTION @ local


def evolve_bmv(cfg: BMVConfig) -> StageOneOutcome:
    phi = branch_phases(cfg)
    amps = 0.5 * np.exp(1j * np.array([phi[b] for b in BRANCHES]))
    rho = np.outer(amps, amps.conj())
    coherence = np.exp(-cfg.dephasing_rate * cfg.fall_time)
    off = ~np.eye(4, dtype=bool)
    rho[off] *= coherence
    state = apply_unitary(DensityMatrix(rho), corrective_unitary(cfg))
    fid = fidelity(state, singlet())
    return StageOneOutcome(state, entangling_phase(cfg), fid, witness_value(state))


def tune_for_singlet(cfg: BMVConfig) -> BMVConfig:
    """Return ``cfg`` with the shortest fall time giving an entangling phase of magnitude pi."""
    d = cfg.branch_distance
    inv = 1 / d["LR"] + 1 / d["RL"] - 1 / d["LL"] - 1 / d["RR"]
    scale = max(1 / v for v in d.values())
    if abs(inv) <= 1e-12 * scale:
        raise NoSolutionError("symmetric branch geometry: the entangling phase is identically zero")
    tau = np.pi / (_phase_rate(cfg) * abs(inv))
    return replace(cfg, fall_time=float(tau))


def witness_value(rho: DensityMatrix) -> float:
    """Tr(W rho) with W = I/2 - |Psi-><Psi-|; negative certifies entanglement."""
    if rho.dim != 4:
        raise InvalidInputError("witness needs a two-qubit state")
    return 0.5 - fidelity(rho, singlet())


# -- interaction structure ------------------------------------------------

STANDARD_SYSTEMS = ("particle1", "particle2", "photon1", "photon2")
COUPLING_KINDS = ("gravity", "electromagnetic", "other")


@dataclass(frozen=True)
class Coupling:
    a: str
    b: str
    kind: str
    stage: int

    def label(self) -> str:
        return f"{self.a}-{self.b} ({self.kind}, stage {self.stage})"

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "kind": self.kind, "stage": self.stage}


@dataclass(frozen=True)
class InteractionDeclaration:
    """Declared systems and pairwise couplings.

    Any system label outside the particle and photon labels is treated as an
    environment node that can mediate an indirect interaction.
    """

    systems: tuple = STANDARD_SYSTEMS
    couplings: tuple = field(default_factory=tuple)

    def __post_init__(self):
        systems = tuple(self.systems)
        couplings = tuple(c if isinstance(c, Coupling) else Coupling(*c) for c in self.couplings)
        if len(set(systems)) != len(systems):
            raise InvariantError("duplicate system labels")
        for c in couplings:
            if c.a not in systems or c.b not in systems:
                raise InvariantError(f"coupling {c.label()} references an undeclared system")
            if c.kind not in COUPLING_KINDS:
                raise InvariantError(f"unknown coupling kind {c.kind!r}")
            if c.stage not in (1, 2, 3):
                raise InvariantError(f"coupling stage must be 1, 2 or 3, got {c.stage!r}")
        object.__setattr__(self, "systems", systems)
        object.__setattr__(self, "couplings", couplings)

    def with_coupling(self, *c) -> InteractionDeclaration:
        extra = c[0] if len(c) == 1 and isinstance(c[0], Coupling) else Coupling(*c)
        systems = self.systems
        for s in (extra.a, extra.b):
            if s not in systems:
                systems = systems + (s,)
        return InteractionDeclaration(systems, self.couplings + (extra,))

    def stage_couplings(self, stage: int) -> list:
        return [c for c in self.couplings if c.stage == stage]

    def to_dict(self) -> dict:
        return {"systems": list(self.systems), "couplings": [c.to_dict() for c in self.couplings]}


def default_interactions() -> InteractionDeclaration:
    return InteractionDeclaration(
        STANDARD_SYSTEMS,
        (
            Coupling("particle1", "particle2", "gravity", 1),
            Coupling("particle1", "photon1", "electromagnetic", 2),
            Coupling("particle2", "photon2", "electromagnetic", 2),
        ),
    )


def _simple_paths(couplings, src, dst):
    """Every simple path from src to dst, as a list of couplings."""
    adj = {}
    for c in couplings:
        adj.setdefault(c.a, []).append((c.b, c))
        adj.setdefault(c.b, []).append((c.a, c))
    stack = [(src, [], {src})]
    while stack:
        node, path, seen = stack.pop()
        for nxt, c in adj.get(node, ()):
            if nxt == dst:
                yield path + [c]
            elif nxt not in seen:
                stack.append((nxt, path + [c], seen | {nxt}))


def shortest_block_path(couplings, block_a, block_b):
    """Node path from any node of ``block_a`` to any of ``block_b``, or None."""
    adj = {}
    for c in couplings:
        adj.setdefault(c.a, set()).add(c.b)
        adj.setdefault(c.b, set()).add(c.a)
    prev = {n: None for n in block_a}
    queue = deque(sorted(block_a))
    while queue:
        node = queue.popleft()
        if node in block_b:
            path = [node]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            return path[::-1]
        for nxt in sorted(adj.get(node, ())):
            if nxt not in prev:
                prev[nxt] = node
                queue.append(nxt)
    return None


def check_condition_1(initial_state: DensityMatrix) -> CheckResult:
    """The two particles start unentangled."""
    if initial_state.dim != 4:
        raise InvalidInputError("condition 1 needs a two-qubit initial state")
    neg = negativity(initial_state)
    product = tensor(partial_trace(initial_state, 1), partial_trace(initial_state, 2))
    fact_err = float(np.max(np.abs(initial_state.entries - product.entries)))
    messages = []
    if neg > CONDITION1_NEGATIVITY_TOL:
        messages.append(f"initial negativity {neg:.6g} exceeds {CONDITION1_NEGATIVITY_TOL:g}")
    if fact_err > CONDITION1_FACTORIZATION_TOL:
        messages.append(f"initial state does not factorize (max deviation {fact_err:.6g})")
    return CheckResult("condition_1", FAIL if messages else PASS, tuple(messages),
                       {"negativity": neg, "factorization_error": fact_err})


def check_condition_2(decl: InteractionDeclaration) -> CheckResult:
    """During stage 1 the particles interact through gravity alone."""
    offending = []
    for path in _simple_paths(decl.stage_couplings(1), "particle1", "particle2"):
        bad = [c for c in path if c.kind != "gravity"]
        if bad:
            offending.append(" via ".join(c.label() for c in bad) if len(path) == 1
                             else "path " + " / ".join(c.label() for c in path))
    messages = tuple(sorted(set(offending)))
    return CheckResult("condition_2", FAIL if messages else PASS, messages)


def check_conditions_1_2(decl: InteractionDeclaration, initial_state: DensityMatrix) -> CheckResult:
    c1 = check_condition_1(initial_state)
    c2 = check_condition_2(decl)
    messages = tuple(f"condition 1: {m}" for m in c1.messages) + tuple(f"condition 2: {m}" for m in c2.messages)
    return CheckResult("conditions_1_2", PASS if c1.passed and c2.passed else FAIL, messages,
                       {"condition_1": c1.status, "condition_2": c2.status})


def initial_spin_state() -> DensityMatrix:
    """(|0> + |1>)/sqrt(2) on each particle."""
    plus = np.full((2, 2), 0.5)
    return tensor(DensityMatrix(plus), DensityMatrix(plus))
