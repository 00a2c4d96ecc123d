"""sparse bosonic fock states over a registry of labelled optical modes

states are immutable maps from occupation tuples (one photon count per
registered mode, in registry order) to complex amplitudes. every operation
returns a new state and prunes amplitudes below PRUNE_THRESHOLD.
"""

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import (
    Callable,
    Dict,
    Iterable,
    Iterator,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

from .config import FOCK_CUTOFF, NORM_TOLERANCE, PRUNE_THRESHOLD
from .errors import (
    ConfigurationError,
    DegenerateStateError,
    TruncationError,
    UsageError,
)

Occupation = Tuple[int, ...]
Pattern = Callable[[Occupation], bool]


class Polarization(enum.Enum):
    """linear polarization basis labels"""

    V = "v"
    H = "h"


class Spatial(enum.Enum):
    """spatial (and temporal) mode labels, in canonical registry order"""

    A = "a"
    B = "b"
    INPUT_ORTHOGONAL = "c"
    A_PORT2 = "a2"
    C_PORT2 = "c2"
    LOSS1 = "loss1"
    LOSS2 = "loss2"


@dataclass(frozen=True)
class ModeId:
    """one optical mode: a spatial label with a polarization"""

    spatial: Spatial
    polarization: Polarization

    def __str__(self):
        return f"{self.spatial.value}_{self.polarization.value}"


def modes_of(*spatials: Spatial) -> Tuple[ModeId, ...]:
    """the (v, h) mode pair of every given spatial label, in order"""
    pols = (Polarization.V, Polarization.H)
    return tuple(ModeId(s, p) for s in spatials for p in pols)


A_V = ModeId(Spatial.A, Polarization.V)
A_H = ModeId(Spatial.A, Polarization.H)
B_V = ModeId(Spatial.B, Polarization.V)
B_H = ModeId(Spatial.B, Polarization.H)
C_V = ModeId(Spatial.INPUT_ORTHOGONAL, Polarization.V)
C_H = ModeId(Spatial.INPUT_ORTHOGONAL, Polarization.H)


@dataclass(frozen=True)
class ModeRegistry:
    """ordered, immutable list of modes; fixes the occupation tuple layout"""

    modes: Tuple[ModeId, ...]
    _index: Mapping[ModeId, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.modes)) != len(self.modes):
            raise ConfigurationError("registry", "duplicate mode")
        object.__setattr__(
            self, "_index", MappingProxyType({m: i for i, m in enumerate(self.modes)})
        )

    @classmethod
    def of(cls, *spatials: Spatial) -> "ModeRegistry":
        return cls(modes_of(*spatials))

    @classmethod
    def standard(cls) -> "ModeRegistry":
        """every spatial label the simulator uses, both polarizations each"""
        return cls.of(*Spatial)

    def __len__(self):
        return len(self.modes)

    def __iter__(self) -> Iterator[ModeId]:
        return iter(self.modes)

    def __contains__(self, mode) -> bool:
        return mode in self._index

    def index(self, mode: ModeId) -> int:
        try:
            return self._index[mode]
        except KeyError:
            raise UsageError(f"mode {mode} is not registered") from None

    def indices(
        self,
        spatials: Optional[Iterable[Spatial]] = None,
        polarizations: Optional[Iterable[Polarization]] = None,
    ) -> Tuple[int, ...]:
        """positions of registered modes matching the given labels"""
        spatial_set = set(spatials) if spatials is not None else None
        pol_set = set(polarizations) if polarizations is not None else None
        return tuple(
            i
            for i, m in enumerate(self.modes)
            if (spatial_set is None or m.spatial in spatial_set)
            and (pol_set is None or m.polarization in pol_set)
        )

    def counter(
        self,
        spatials: Optional[Iterable[Spatial]] = None,
        polarizations: Optional[Iterable[Polarization]] = None,
    ) -> Callable[[Occupation], int]:
        """photon-number function over the matching modes of an occupation"""
        idx = self.indices(spatials, polarizations)
        return lambda occ: sum(occ[i] for i in idx)

    def occupation(self, counts: Mapping[ModeId, int]) -> Occupation:
        """build an occupation tuple from per-mode photon numbers"""
        occ = [0] * len(self.modes)
        for mode, n in counts.items():
            if n < 0:
                raise UsageError(f"negative occupation for {mode}")
            occ[self.index(mode)] = n
        return tuple(occ)


def _pruned(terms: Mapping[Occupation, complex]) -> Dict[Occupation, complex]:
    return {occ: amp for occ, amp in terms.items() if abs(amp) >= PRUNE_THRESHOLD}


@dataclass(frozen=True)
class FockState:
    """sparse superposition of occupation-number basis states"""

    registry: ModeRegistry
    terms: Mapping[Occupation, complex]
    cutoff: int = FOCK_CUTOFF

    def __post_init__(self):
        dim = len(self.registry)
        clean = {}
        for occ, amp in _pruned(self.terms).items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != dim:
                raise UsageError(
                    f"occupation {occ} does not match {dim} registered modes"
                )
            if sum(occ) > self.cutoff:
                raise TruncationError(occ, self.cutoff)
            clean[occ] = complex(amp)
        object.__setattr__(self, "terms", MappingProxyType(clean))

    @property
    def dimension(self) -> int:
        return len(self.registry)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def normalized(self) -> bool:
        return abs(self.norm_sq() - 1.0) <= NORM_TOLERANCE

    def norm_sq(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self.terms.values())

    def amplitude(self, occupation: Union[Occupation, Mapping[ModeId, int]]) -> complex:
        if isinstance(occupation, Mapping):
            occupation = self.registry.occupation(occupation)
        return self.terms.get(tuple(occupation), 0j)

    def with_terms(self, terms: Mapping[Occupation, complex]) -> "FockState":
        return FockState(self.registry, terms, self.cutoff)

    def scale(self, factor: complex) -> "FockState":
        return self.with_terms({occ: amp * factor for occ, amp in self.terms.items()})

    def __mul__(self, factor: complex) -> "FockState":
        return self.scale(factor)

    __rmul__ = __mul__

    def __add__(self, other: "FockState") -> "FockState":
        _check_same_registry(self, other)
        out: Dict[Occupation, complex] = defaultdict(complex, self.terms)
        for occ, amp in other.terms.items():
            out[occ] += amp
        return self.with_terms(out)

    def __sub__(self, other: "FockState") -> "FockState":
        return self + other.scale(-1)

    def distance(self, other: "FockState") -> float:
        """euclidean norm of the difference, for tolerance checks"""
        return math.sqrt((self - other).norm_sq())

    def photon_numbers(self) -> Tuple[int, ...]:
        return tuple(sorted({sum(occ) for occ in self.terms}))


def _check_same_registry(s1: FockState, s2: FockState):
    if s1.registry != s2.registry:
        raise UsageError("states live on different mode registries")


def make_vacuum(registry: ModeRegistry, cutoff: int = FOCK_CUTOFF) -> FockState:
    """the all-zero occupation with amplitude 1"""
    if len(registry) == 0:
        raise ConfigurationError("registry", "at least one mode must be registered")
    if cutoff < 0:
        raise ConfigurationError("fock_cutoff", "must be non-negative")
    return FockState(registry, {(0,) * len(registry): 1 + 0j}, cutoff)


def create(state: FockState, mode: ModeId) -> FockState:
    """apply the creation operator of one mode"""
    return create_linear(state, [(mode, 1.0)])


def create_linear(
    state: FockState, components: Iterable[Tuple[ModeId, complex]]
) -> FockState:
    """apply sum_k c_k a_k^dagger, i.e. add one photon in a superposition mode"""
    out: Dict[Occupation, complex] = defaultdict(complex)
    for mode, coeff in components:
        if coeff == 0:
            continue
        k = state.registry.index(mode)
        for occ, amp in state.terms.items():
            n = occ[k]
            new = occ[:k] + (n + 1,) + occ[k + 1 :]
            if sum(new) > state.cutoff:
                raise TruncationError(new, state.cutoff)
            out[new] += coeff * amp * math.sqrt(n + 1)
    return state.with_terms(out)


def annihilate(state: FockState, mode: ModeId) -> FockState:
    """apply the annihilation operator of one mode; vacuum terms vanish"""
    k = state.registry.index(mode)
    out: Dict[Occupation, complex] = defaultdict(complex)
    for occ, amp in state.terms.items():
        n = occ[k]
        if n == 0:
            continue
        out[occ[:k] + (n - 1,) + occ[k + 1 :]] += amp * math.sqrt(n)
    return state.with_terms(out)


def inner_product(s1: FockState, s2: FockState) -> complex:
    """<s1|s2>, conjugate-linear in the first argument"""
    _check_same_registry(s1, s2)
    small, large = (s1, s2) if len(s1.terms) <= len(s2.terms) else (s2, s1)
    total = 0j
    for occ in small.terms:
        if occ in large.terms:
            total += s1.terms[occ].conjugate() * s2.terms[occ]
    return total


def normalize(state: FockState) -> FockState:
    norm_sq = state.norm_sq()
    if norm_sq == 0.0:
        raise DegenerateStateError("cannot normalize the zero state")
    return state.scale(1.0 / math.sqrt(norm_sq))


def project_pattern(
    state: FockState, pattern: Pattern
) -> Tuple[float, Optional[FockState]]:
    """
    probability (relative to <psi|psi>) that the occupation satisfies the
    pattern, and the renormalized conditional state (None when probability is 0)
    """
    total = state.norm_sq()
    if total == 0.0:
        raise DegenerateStateError("cannot project the zero state")
    matched = {occ: amp for occ, amp in state.terms.items() if pattern(occ)}
    weight = math.fsum(abs(a) ** 2 for a in matched.values())
    if weight == 0.0:
        return 0.0, None
    return weight / total, normalize(state.with_terms(matched))


def expectation_number(state: FockState, modes: Sequence[ModeId]) -> float:
    """<psi| sum_m n_m |psi> / <psi|psi>"""
    total = state.norm_sq()
    if total == 0.0:
        raise DegenerateStateError("expectation in the zero state")
    idx = [state.registry.index(m) for m in modes]
    weighted = math.fsum(
        abs(amp) ** 2 * sum(occ[i] for i in idx) for occ, amp in state.terms.items()
    )
    return weighted / total
