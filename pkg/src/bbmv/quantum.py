"""Exact one- and two-qubit linear algebra.

Basis ordering is |00>, |01>, |10>, |11> with subsystem 1 the left tensor
factor. All objects are immutable; their arrays are marked read-only.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, InvariantError

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
COMPLETENESS_TOL = 1e-10
PROB_TOL = 1e-9

_DIMS = (2, 4)


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=complex)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Ket:
    """Normalized pure state of one or two qubits."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.size not in _DIMS:
            raise InvariantError(f"ket dimension must be 2 or 4, got {amps.size}")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise InvariantError(f"ket squared norm is {norm!r}, expected 1")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Trace-one positive semidefinite Hermitian operator of dimension 2 or 4."""

    entries: np.ndarray

    def __post_init__(self):
        rho = _frozen(self.entries)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] not in _DIMS:
            raise InvariantError(f"density matrix must be 2x2 or 4x4, got shape {rho.shape}")
        herm_err = np.max(np.abs(rho - rho.conj().T))
        if herm_err > HERMITIAN_TOL:
            raise InvariantError(f"density matrix not Hermitian (deviation {herm_err:.3e})")
        tr = np.trace(rho)
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvariantError(f"density matrix trace is {tr!r}, expected 1")
        lo = np.linalg.eigvalsh(rho).min()
        if lo < -PSD_TOL:
            raise InvariantError(f"density matrix has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "entries", rho)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues, with round-off negatives above -1e-10 clamped to 0."""
        w = np.linalg.eigvalsh(self.entries)
        w[(w < 0) & (w > -PSD_TOL)] = 0.0
        return w

    def purity(self) -> float:
        return float(np.trace(self.entries @ self.entries).real)

    def allclose(self, other: DensityMatrix, atol: float = 1e-10) -> bool:
        return self.dim == other.dim and bool(np.allclose(self.entries, other.entries, atol=atol, rtol=0))


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """Completely positive trace-preserving map in Kraus form."""

    kraus_ops: tuple

    def __post_init__(self):
        ops = tuple(_frozen(k) for k in self.kraus_ops)
        if not ops:
            raise InvariantError("channel needs at least one Kraus operator")
        shape = ops[0].shape
        if len(shape) != 2 or shape[0] != shape[1] or any(k.shape != shape for k in ops):
            raise InvariantError("Kraus operators must be square and share a shape")
        total = sum(k.conj().T @ k for k in ops)
        err = np.max(np.abs(total - np.eye(shape[0])))
        if err > COMPLETENESS_TOL:
            raise InvariantError(f"Kraus operators not complete (deviation {err:.3e})")
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian observable; ``dichotomic`` additionally requires matrix**2 = I."""

    matrix: np.ndarray
    dichotomic: bool = True

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvariantError(f"observable must be square, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise InvariantError("observable not Hermitian")
        if self.dichotomic and np.max(np.abs(m @ m - np.eye(m.shape[0]))) > 1e-10:
            raise InvariantError("dichotomic observable must square to the identity")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

for _m in (IDENTITY2, SIGMA_X, SIGMA_Y, SIGMA_Z, HADAMARD):
    _m.setflags(write=False)


def ket(amplitudes: Sequence[complex]) -> Ket:
    return Ket(np.asarray(amplitudes, dtype=complex))


def ket0() -> Ket:
    return ket([1, 0])


def ket1() -> Ket:
    return ket([0, 1])


def plus() -> Ket:
    return ket(np.array([1, 1]) / np.sqrt(2))


def singlet() -> Ket:
    """The antisymmetric two-qubit state (|01> - |10>)/sqrt(2)."""
    s = 1 / np.sqrt(2)
    return ket([0, s, -s, 0])


def as_density(psi: Ket) -> DensityMatrix:
    a = psi.amplitudes
    return DensityMatrix(np.outer(a, a.conj()))


def maximally_mixed(dim: int) -> DensityMatrix:
    if dim not in _DIMS:
        raise InvalidInputError(f"dimension must be 2 or 4, got {dim}")
    return DensityMatrix(np.eye(dim) / dim)


def werner(visibility: float) -> DensityMatrix:
    """v |Psi-><Psi-| + (1 - v) I/4."""
    if not 0.0 <= visibility <= 1.0:
        raise InvalidInputError(f"visibility must lie in [0, 1], got {visibility}")
    return DensityMatrix(visibility * as_density(singlet()).entries + (1 - visibility) * np.eye(4) / 4)


def tensor(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    if a.dim != 2 or b.dim != 2:
        raise InvalidInputError(f"tensor needs two qubit states, got dims {a.dim} and {b.dim}")
    return DensityMatrix(np.kron(a.entries, b.entries))


def partial_trace(rho: DensityMatrix, keep: int) -> DensityMatrix:
    """Reduced state of subsystem ``keep`` (1 or 2)."""
    if rho.dim != 4:
        raise InvalidInputError(f"partial trace needs a two-qubit state, got dim {rho.dim}")
    r = rho.entries.reshape(2, 2, 2, 2)
    if keep == 1:
        return DensityMatrix(np.einsum("ijkj->ik", r))
    if keep == 2:
        return DensityMatrix(np.einsum("jijk->ik", r))
    raise InvalidInputError(f"subsystem index must be 1 or 2, got {keep!r}")


def partial_transpose(rho: DensityMatrix) -> np.ndarray:
    """Partial transpose over subsystem 2 (a Hermitian matrix, not a state)."""
    if rho.dim != 4:
        raise InvalidInputError(f"partial transpose needs a two-qubit state, got dim {rho.dim}")
    return rho.entries.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)


def apply_unitary(rho: DensityMatrix, u: np.ndarray) -> DensityMatrix:
    u = np.asarray(u, dtype=complex)
    if u.shape != (rho.dim, rho.dim):
        raise InvalidInputError(f"unitary shape {u.shape} does not match state dim {rho.dim}")
    return DensityMatrix(u @ rho.entries @ u.conj().T)


def apply_channel(rho: DensityMatrix, ch: QuantumChannel) -> DensityMatrix:
    if ch.dim != rho.dim:
        raise InvalidInputError(f"channel dim {ch.dim} does not match state dim {rho.dim}")
    out = sum(k @ rho.entries @ k.conj().T for k in ch.kraus_ops)
    return DensityMatrix(out)


def identity_channel(dim: int = 2) -> QuantumChannel:
    return QuantumChannel((np.eye(dim),))


def depolarizing_channel(p: float) -> QuantumChannel:
    """Single-qubit rho -> (1 - p) rho + p I/2."""
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"depolarizing probability must lie in [0, 1], got {p}")
    return QuantumChannel((
        np.sqrt(1 - 3 * p / 4) * IDENTITY2,
        np.sqrt(p / 4) * SIGMA_X,
        np.sqrt(p / 4) * SIGMA_Y,
        np.sqrt(p / 4) * SIGMA_Z,
    ))


def dephasing_channel(factor: float) -> QuantumChannel:
    """Single-qubit channel scaling the off-diagonal entries by ``factor``."""
    if not 0.0 <= factor <= 1.0:
        raise InvalidInputError(f"dephasing factor must lie in [0, 1], got {factor}")
    return QuantumChannel((
        np.sqrt((1 + factor) / 2) * IDENTITY2,
        np.sqrt((1 - factor) / 2) * SIGMA_Z,
    ))


def local_channel(ch: QuantumChannel, side: int) -> QuantumChannel:
    """Lift a single-qubit channel to act on ``side`` of a two-qubit system."""
    if ch.dim != 2:
        raise InvalidInputError("only single-qubit channels can be lifted")
    if side == 1:
        return QuantumChannel(tuple(np.kron(k, IDENTITY2) for k in ch.kraus_ops))
    if side == 2:
        return QuantumChannel(tuple(np.kron(IDENTITY2, k) for k in ch.kraus_ops))
    raise InvalidInputError(f"side must be 1 or 2, got {side!r}")


def fidelity(rho: DensityMatrix, target: Ket) -> float:
    """<target|rho|target>."""
    if rho.dim != target.dim:
        raise InvalidInputError(f"state dim {rho.dim} does not match target dim {target.dim}")
    t = target.amplitudes
    val = np.vdot(t, rho.entries @ t)
    return float(min(1.0, max(0.0, val.real)))


def negativity(rho: DensityMatrix) -> float:
    """Sum of the magnitudes of the negative eigenvalues of the partial transpose."""
    w = np.linalg.eigvalsh(partial_transpose(rho))
    return float(max(0.0, -w[w < 0].sum()))


def expectation(rho: DensityMatrix, obs: Observable) -> float:
    if obs.dim != rho.dim:
        raise InvalidInputError(f"observable dim {obs.dim} does not match state dim {rho.dim}")
    return float(np.trace(rho.entries @ obs.matrix).real)


def sample_outcomes(probs: Sequence[float], rng: np.random.Generator, size: int | None = None):
    """Draw outcome indices from a discrete distribution.

    Returns a single int when ``size`` is None, otherwise an int array of
    length ``size``. Uses one uniform variate per draw, so the stream consumed
    from ``rng`` depends only on the number of draws.
    """
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidInputError("probabilities must be a non-empty 1-d sequence")
    if np.any(p < 0):
        raise InvalidInputError("probabilities must be non-negative")
    if abs(p.sum() - 1.0) > PROB_TOL:
        raise InvalidInputError(f"probabilities sum to {p.sum()!r}, expected 1")
    cdf = np.cumsum(p / p.sum())
    last = int(np.flatnonzero(p > 0)[-1])
    u = rng.random() if size is None else rng.random(size)
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), last)
    return int(idx) if size is None else idx


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random state from the Ginibre ensemble, optionally of reduced rank."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return DensityMatrix(rho / np.trace(rho).real)


def random_ket(dim: int, rng: np.random.Generator) -> Ket:
    z = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return Ket(z / np.linalg.norm(z))
