"""Spin-to-photon state transfer and the stage-2 isolation check."""
from __future__ import annotations

from dataclasses import dataclass

from .bmv import InteractionDeclaration, shortest_block_path
from .errors import InvalidInputError, InvariantError
from .quantum import DensityMatrix, apply_channel, depolarizing_channel, local_channel
from .reports import FAIL, PASS, CheckResult

MODES = ("ideal", "depolarizing")

BLOCK_1 = frozenset({"particle1", "photon1"})
BLOCK_2 = frozenset({"particle2", "photon2"})


@dataclass(frozen=True)
class TransferConfig:
    swap_fidelity_mode: str = "ideal"
    depolarizing_probability_side1: float = 0.0
    depolarizing_probability_side2: float = 0.0

    def __post_init__(self):
        if self.swap_fidelity_mode not in MODES:
            raise InvariantError(f"swap_fidelity_mode must be one of {MODES}, got {self.swap_fidelity_mode!r}")
        for p in (self.depolarizing_probability_side1, self.depolarizing_probability_side2):
            if not 0.0 <= p <= 1.0:
                raise InvariantError(f"depolarizing probability {p!r} outside [0, 1]")

    @classmethod
    def depolarizing(cls, p1: float, p2: float | None = None) -> TransferConfig:
        return cls("depolarizing", p1, p1 if p2 is None else p2)

    def to_dict(self) -> dict:
        return {
            "swap_fidelity_mode": self.swap_fidelity_mode,
            "depolarizing_probability_side1": self.depolarizing_probability_side1,
            "depolarizing_probability_side2": self.depolarizing_probability_side2,
        }


def transfer_to_photons(rho_spins: DensityMatrix, cfg: TransferConfig) -> DensityMatrix:
    """Swap S1 S2 into P1 P2; the output is the photon-pair state.

    Ideal mode is the identity on the two-qubit state. Depolarizing mode
    applies an independent depolarizing channel on each side.
    """
    if rho_spins.dim != 4:
        raise InvalidInputError("transfer needs a two-qubit spin state")
    if cfg.swap_fidelity_mode == "ideal":
        return rho_spins
    rho = apply_channel(rho_spins, local_channel(depolarizing_channel(cfg.depolarizing_probability_side1), 1))
    return apply_channel(rho, local_channel(depolarizing_channel(cfg.depolarizing_probability_side2), 2))


def check_condition_3(decl: InteractionDeclaration) -> CheckResult:
    """No stage-2 interaction links the wing-1 block to the wing-2 block.

    Both direct couplings and chains through other systems count.
    """
    path = shortest_block_path(decl.stage_couplings(2), BLOCK_1, BLOCK_2)
    if path is None:
        return CheckResult("condition_3", PASS)
    return CheckResult("condition_3", FAIL, (f"stage-2 interaction path {' -> '.join(path)}",),
                       {"path": path})
