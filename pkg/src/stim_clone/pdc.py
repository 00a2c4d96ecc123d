"""the cloning interaction: perturbative down-conversion seeded by an input photon

H / kappa = (a_v^+ b_h^+ - e^{i phi} a_h^+ b_v^+) + h.c.; the input photon
lives in the mode a~ = gamma a + sqrt(1 - gamma^2) c, where c is a
temporally distinguishable copy of a that the pair source never emits into.
"""

import enum
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .config import FOCK_CUTOFF, KAPPA_T_WARN, NORM_TOLERANCE
from .core_logging import logger
from .errors import ConfigurationError, SimulationError
from .fock import (
    A_H,
    A_V,
    B_H,
    B_V,
    C_H,
    C_V,
    FockState,
    ModeRegistry,
    Spatial,
    annihilate,
    create,
    create_linear,
    make_vacuum,
)
from .optics import ModeTransform, is_unitary, jones_element

PHASE_GRID_POINTS = 8
MAX_POISSON_LAYER = 2


class PhotonStatistics(enum.Enum):
    EXACTLY_ONE = "exactly_one"
    POISSON = "poisson"


@dataclass(frozen=True)
class PdcConfig:
    """coupling, taylor order and pair-phase dephasing of the source"""

    kappa_t: float = 0.0316
    order: int = 1
    dephasing: float = 0.0

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ConfigurationError("pdc.order", "must be 0, 1 or 2")
        if not 0.0 <= self.dephasing <= 1.0:
            raise ConfigurationError("pdc.dephasing", "must be in [0, 1]")
        if not math.isfinite(self.kappa_t):
            raise ConfigurationError("pdc.kappa_t", "must be finite")
        if abs(self.kappa_t) > KAPPA_T_WARN:
            logger.warning(
                "kappa_t outside the perturbative regime",
                extra={"props": {"kappa_t": self.kappa_t, "limit": KAPPA_T_WARN}},
            )


@dataclass(frozen=True)
class InputSpec:
    """polarization, temporal overlap and photon statistics of the input pulse"""

    polarization: Tuple[complex, complex] = (1 + 0j, 0j)
    gamma: float = 1.0
    statistics: PhotonStatistics = PhotonStatistics.EXACTLY_ONE
    mean_photon_number: float = 0.05

    def __post_init__(self):
        pol = tuple(complex(x) for x in self.polarization)
        if len(pol) != 2:
            raise ConfigurationError("input.polarization", "must have two components")
        norm = abs(pol[0]) ** 2 + abs(pol[1]) ** 2
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ConfigurationError(
                "input.polarization", "jones vector must be unit norm"
            )
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError("input.gamma", "must be in [0, 1]")
        if not self.mean_photon_number >= 0.0:
            raise ConfigurationError("input.mean_photon_number", "must be >= 0")
        object.__setattr__(self, "polarization", pol)


def photon_number_weights(spec: InputSpec) -> List[Tuple[int, float]]:
    """fock layers of the input pulse with their classical mixing weights"""
    if spec.statistics is PhotonStatistics.EXACTLY_ONE:
        return [(1, 1.0)]
    nbar = spec.mean_photon_number
    raw = [nbar**n / math.factorial(n) for n in range(MAX_POISSON_LAYER + 1)]
    total = math.fsum(raw)
    return [(n, w / total) for n, w in enumerate(raw)]


def phase_grid(dephasing: float) -> Tuple[float, ...]:
    """bin centres of [-d pi, d pi]; a single zero phase when fully coherent"""
    if dephasing == 0.0:
        return (0.0,)
    n = PHASE_GRID_POINTS
    return tuple(dephasing * math.pi * (-1.0 + (2 * k + 1) / n) for k in range(n))


def hamiltonian_apply(
    state: FockState, phase: float = 0.0, coupling: float = 1.0
) -> FockState:
    """H|psi> with H = coupling * [(a_v+ b_h+ - e^{i phase} a_h+ b_v+) + h.c.]"""
    rel = complex(math.cos(phase), math.sin(phase))
    emit = create(create(state, B_H), A_V) - create(create(state, B_V), A_H).scale(rel)
    absorb = annihilate(annihilate(state, B_H), A_V) - annihilate(
        annihilate(state, B_V), A_H
    ).scale(rel.conjugate())
    return (emit + absorb).scale(coupling)


def inject_input(
    spec: InputSpec, registry: ModeRegistry, photons: int = 1, cutoff: int = FOCK_CUTOFF
) -> FockState:
    """(a~^+)^n / sqrt(n!) |0>, a~ split between a (gamma) and c (sqrt(1-gamma^2))"""
    if photons < 0:
        raise ConfigurationError("input.photons", "must be >= 0")
    v, h = spec.polarization
    g = spec.gamma
    s = math.sqrt(max(0.0, 1.0 - g * g))
    components = [(A_V, g * v), (A_H, g * h), (C_V, s * v), (C_H, s * h)]
    state = make_vacuum(registry, cutoff)
    for _ in range(photons):
        state = create_linear(state, components)
    return state.scale(1.0 / math.sqrt(math.factorial(photons)))


def evolve(state: FockState, cfg: PdcConfig, phase: float = 0.0) -> FockState:
    """sum_{k <= order} (-i H t)^k / k! |input>, left unnormalized"""
    total = state
    term = state
    for k in range(1, cfg.order + 1):
        term = hamiltonian_apply(term, phase).scale(-1j * cfg.kappa_t / k)
        total = total + term
    return total


def restore_norm(state: FockState) -> FockState:
    """
    absorb the norm excess of the truncated series in the emission-free sector

    terms with a photon in b keep their amplitudes; the sector without b
    photons is rescaled so that <psi|psi> = 1.
    """
    count_b = state.registry.counter([Spatial.B])
    quiet = {o: a for o, a in state.terms.items() if count_b(o) == 0}
    loud = {o: a for o, a in state.terms.items() if count_b(o) > 0}
    quiet_w = math.fsum(abs(a) ** 2 for a in quiet.values())
    loud_w = math.fsum(abs(a) ** 2 for a in loud.values())
    target = 1.0 - loud_w
    if quiet_w <= 0.0 or target <= 0.0:
        raise SimulationError(
            f"cannot restore norm: heralded weight {loud_w:.3g} leaves no room"
        )
    factor = math.sqrt(target / quiet_w)
    merged = dict(loud)
    merged.update({o: a * factor for o, a in quiet.items()})
    return state.with_terms(merged)


def joint_rotation(jones: Sequence[Sequence[complex]]) -> ModeTransform:
    """the same polarization unitary on a, b and the input-orthogonal mode c"""
    matrix = np.asarray(jones, dtype=complex)
    if matrix.shape != (2, 2) or not is_unitary(matrix):
        raise ConfigurationError("jones", "joint rotation must be a 2x2 unitary")
    return jones_element(
        matrix, (Spatial.A, Spatial.B, Spatial.INPUT_ORTHOGONAL), "joint rotation"
    )
