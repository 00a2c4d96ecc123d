"""linear-optical elements as unitary maps on creation operators

a transform over modes (m_0..m_k) with matrix U maps
a_j^dagger -> sum_i U[i, j] a_i^dagger. on the (v, h) pair of a single
spatial mode U is the ordinary jones matrix. lossy elements are unitary
over an extended mode set that includes explicit loss modes.
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from .config import UNITARY_TOLERANCE
from .errors import ConfigurationError, UsageError
from .fock import FockState, ModeId, Occupation, Spatial, modes_of


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOLERANCE) -> bool:
    """square and U^dagger U = 1 within `tol`"""
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), rtol=0.0, atol=tol))


@dataclass(frozen=True)
class ModeTransform:
    """unitary matrix over an ordered subset of registered modes"""

    modes: Tuple[ModeId, ...]
    matrix: np.ndarray = field(compare=False)
    description: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        n = len(self.modes)
        if len(set(self.modes)) != n:
            raise ConfigurationError("transform.modes", "duplicate mode")
        if m.shape != (n, n):
            raise ConfigurationError(
                "transform.matrix", f"expected shape {(n, n)}, got {m.shape}"
            )
        if not is_unitary(m):
            raise ConfigurationError(
                "transform.matrix", f"{self.description or 'element'} is not unitary"
            )
        m.setflags(write=False)
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "matrix", m)

    def embedded(self, modes: Sequence[ModeId]) -> np.ndarray:
        """this matrix acting on a superset of modes (identity elsewhere)"""
        pos = {m: i for i, m in enumerate(modes)}
        missing = [m for m in self.modes if m not in pos]
        if missing:
            raise UsageError(f"modes {missing} not in target mode set")
        out = np.eye(len(modes), dtype=complex)
        idx = [pos[m] for m in self.modes]
        out[np.ix_(idx, idx)] = self.matrix
        return out


def identity(modes: Sequence[ModeId]) -> ModeTransform:
    """do-nothing transform on the given modes"""
    return ModeTransform(tuple(modes), np.eye(len(modes)), "identity")


def compose(second: ModeTransform, first: ModeTransform) -> ModeTransform:
    """the transform equivalent to applying `first` and then `second`"""
    modes = list(first.modes) + [m for m in second.modes if m not in first.modes]
    matrix = second.embedded(modes) @ first.embedded(modes)
    return ModeTransform(
        tuple(modes), matrix, f"{second.description} . {first.description}"
    )


def apply_transform(state: FockState, transform: ModeTransform) -> FockState:
    """substitute every creation operator of the transform's modes"""
    idx = [state.registry.index(m) for m in transform.modes]
    matrix = transform.matrix
    columns = [
        [(idx[row], u) for row, u in enumerate(matrix[:, col]) if u != 0]
        for col in range(len(idx))
    ]

    out: Dict[Occupation, complex] = defaultdict(complex)
    for occ, amp in state.terms.items():
        base = list(occ)
        photons = []
        coeff = amp
        for col, k in enumerate(idx):
            n = occ[k]
            if n:
                photons.extend([col] * n)
                base[k] = 0
                coeff /= math.sqrt(math.factorial(n))

        partial: Dict[Occupation, complex] = {tuple(base): coeff}
        for col in photons:
            nxt: Dict[Occupation, complex] = defaultdict(complex)
            for o, a in partial.items():
                for k, u in columns[col]:
                    m = o[k]
                    nxt[o[:k] + (m + 1,) + o[k + 1 :]] += a * u * math.sqrt(m + 1)
            partial = nxt

        for o, a in partial.items():
            out[o] += a
    return state.with_terms(out)


# jones matrices on (v, h)


def rotation_jones(angle: float) -> np.ndarray:
    """rotates the polarization by `angle`, v towards h"""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]], dtype=complex)


def half_wave_jones(angle: float) -> np.ndarray:
    """fast axis at `angle` from vertical; global phase dropped"""
    c, s = math.cos(2 * angle), math.sin(2 * angle)
    return np.array([[c, s], [s, -c]], dtype=complex)


def quarter_wave_jones(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    phase = np.exp(-1j * math.pi / 4)
    return phase * np.array(
        [
            [c * c + 1j * s * s, (1 - 1j) * s * c],
            [(1 - 1j) * s * c, s * s + 1j * c * c],
        ],
        dtype=complex,
    )


def basis_change_jones(polarization: Sequence[complex]) -> np.ndarray:
    """su(2) jones matrix taking the given unit jones vector to v"""
    v, h = complex(polarization[0]), complex(polarization[1])
    return np.array([[v.conjugate(), h.conjugate()], [-h, v]], dtype=complex)


def jones_element(
    matrix: np.ndarray,
    spatials: Iterable[Spatial] = (Spatial.A,),
    label: str = "jones",
) -> ModeTransform:
    """the same 2x2 jones unitary on the (v, h) pair of every given spatial mode"""
    spatials = tuple(spatials)
    jones = np.asarray(matrix, dtype=complex)
    if jones.shape != (2, 2) or not is_unitary(jones):
        raise ConfigurationError("jones", f"{label} must be a 2x2 unitary")
    full = np.kron(np.eye(len(spatials)), jones)
    return ModeTransform(modes_of(*spatials), full, label)


def half_wave_plate(angle: float, spatials: Iterable[Spatial] = (Spatial.A,)):
    """lambda/2 plate on each given spatial mode"""
    return jones_element(half_wave_jones(angle), spatials, f"hwp({angle:.6g})")


def quarter_wave_plate(angle: float, spatials: Iterable[Spatial] = (Spatial.A,)):
    """lambda/4 plate on each given spatial mode"""
    return jones_element(quarter_wave_jones(angle), spatials, f"qwp({angle:.6g})")


def beam_splitter(
    reflectivity: float,
    port1: Spatial = Spatial.A,
    port2: Spatial = Spatial.A_PORT2,
) -> ModeTransform:
    """polarization-independent splitter, a1 -> t a1 + i r a2, a2 -> i r a1 + t a2"""
    if not 0.0 <= reflectivity <= 1.0:
        raise ConfigurationError("reflectivity", "must be in [0, 1]")
    t, r = math.sqrt(1.0 - reflectivity), math.sqrt(reflectivity)
    block = np.array([[t, 1j * r], [1j * r, t]], dtype=complex)
    # mode order (p1v, p1h, p2v, p2h): couple p1x with p2x
    matrix = np.kron(block, np.eye(2))
    return ModeTransform(modes_of(port1, port2), matrix, f"bs({reflectivity:.6g})")


def pbs(port1: Spatial = Spatial.A, port2: Spatial = Spatial.A_PORT2) -> ModeTransform:
    """v transmits (stays in its port), h reflects into the other port"""
    # (p1v, p1h, p2v, p2h): swap p1h <-> p2h
    matrix = np.array(
        [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
    )
    return ModeTransform(modes_of(port1, port2), matrix, "pbs")


def polarizer(
    angle: float,
    spatial: Spatial = Spatial.A,
    loss: Spatial = Spatial.LOSS1,
) -> ModeTransform:
    """pass axis at `angle` from vertical; the blocked component goes to `loss`"""
    p = np.array([math.cos(angle), math.sin(angle)])
    o = np.array([-math.sin(angle), math.cos(angle)])
    keep, drop = np.outer(p, p), np.outer(o, o)
    matrix = np.block([[keep, drop], [drop, keep]])
    return ModeTransform(modes_of(spatial, loss), matrix, f"polarizer({angle:.6g})")


# temporal overlap


@dataclass(frozen=True)
class OverlapModel:
    """gaussian temporal wavepackets of the input and down-converted photons"""

    sigma_input_fs: float = 280.0
    sigma_dc_fs: float = 100.0

    def __post_init__(self):
        for name in ("sigma_input_fs", "sigma_dc_fs"):
            width = getattr(self, name)
            if not (math.isfinite(width) and width > 0):
                raise ConfigurationError(f"overlap.{name}", "must be finite and > 0")

    @property
    def combined_width(self) -> float:
        return math.hypot(self.sigma_input_fs, self.sigma_dc_fs)

    @property
    def peak_gamma(self) -> float:
        return overlap_gamma(self, 0.0)

    @classmethod
    def matched(cls, peak_gamma: float, sigma_dc_fs: float = 100.0) -> "OverlapModel":
        """input width (>= sigma_dc) giving the requested overlap at zero delay"""
        if not 0.0 < peak_gamma <= 1.0:
            raise ConfigurationError("overlap.peak_gamma", "must be in (0, 1]")
        g2 = peak_gamma * peak_gamma
        ratio = g2 / (1.0 + math.sqrt(1.0 - g2 * g2))
        return cls(sigma_input_fs=sigma_dc_fs / ratio, sigma_dc_fs=sigma_dc_fs)


def overlap_gamma(model: OverlapModel, delay_fs: float) -> float:
    """|<input|dc>| of two gaussian wavepackets separated by `delay_fs`"""
    s1, s2 = model.sigma_input_fs, model.sigma_dc_fs
    width_sq = s1 * s1 + s2 * s2
    shape = math.sqrt(2.0 * s1 * s2 / width_sq)
    return min(1.0, shape) * math.exp(-(delay_fs * delay_fs) / (2.0 * width_sq))
