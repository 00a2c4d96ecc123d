"""tests for stim_clone.fock module"""

import math
from unittest.mock import patch

import numpy as np
import pytest

from stim_clone.errors import (
    ConfigurationError,
    DegenerateStateError,
    TruncationError,
    UsageError,
)
from stim_clone.fock import (
    A_H,
    A_V,
    B_H,
    B_V,
    FockState,
    ModeRegistry,
    Spatial,
    annihilate,
    create,
    create_linear,
    expectation_number,
    inner_product,
    make_vacuum,
    normalize,
    project_pattern,
)
from stim_clone.pdc import PdcConfig, evolve

REG = ModeRegistry.of(Spatial.A, Spatial.B)


def test_vacuum_has_unit_amplitude():
    """test that the vacuum is a single all-zero term"""
    vac = make_vacuum(REG)
    assert vac.amplitude((0, 0, 0, 0)) == 1
    assert vac.norm_sq() == 1.0
    assert vac.photon_numbers() == (0,)


def test_vacuum_rejects_empty_registry():
    """test that an empty registry is a configuration error"""
    with pytest.raises(ConfigurationError):
        make_vacuum(ModeRegistry(()))


def test_create_twice_gives_sqrt2():
    """test bosonic enhancement a+ a+ |0> = sqrt2 |2>"""
    state = create(create(make_vacuum(REG), A_V), A_V)
    assert state.amplitude({A_V: 2}) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_annihilate_vacuum_is_zero():
    """test that annihilating the vacuum yields the zero state"""
    assert annihilate(make_vacuum(REG), A_V).is_zero


def test_annihilate_undoes_create():
    """test a a+ |1> = 2 |1>"""
    one = create(make_vacuum(REG), B_H)
    back = annihilate(create(one, B_H), B_H)
    assert back.amplitude({B_H: 1}) == pytest.approx(2.0)


def test_cutoff_raises_truncation_error():
    """test that exceeding the cutoff is reported, not silently dropped"""
    state = make_vacuum(REG, cutoff=2)
    state = create(create(state, A_V), A_H)
    with pytest.raises(TruncationError) as info:
        create(state, B_V)
    assert info.value.cutoff == 2


def test_create_linear_superposition():
    """test a single photon in a superposition mode"""
    state = create_linear(make_vacuum(REG), [(A_V, 0.6), (A_H, 0.8), (B_V, 0.0)])
    assert state.amplitude({A_V: 1}) == pytest.approx(0.6)
    assert state.amplitude({A_H: 1}) == pytest.approx(0.8)
    assert len(state.terms) == 2
    assert state.norm_sq() == pytest.approx(1.0, abs=1e-15)


def test_normalize_zero_state_raises():
    """test that normalizing the zero state is a degenerate state error"""
    with pytest.raises(DegenerateStateError):
        normalize(FockState(REG, {}))


def test_inner_product_registry_mismatch():
    """test that states on different registries cannot be combined"""
    other = ModeRegistry.of(Spatial.A)
    with pytest.raises(UsageError):
        inner_product(make_vacuum(REG), make_vacuum(other))
    with pytest.raises(UsageError):
        make_vacuum(REG) + make_vacuum(other)


def test_inner_product_conjugates_first_argument():
    """test <1j psi|psi> = -1j"""
    vac = make_vacuum(REG)
    assert inner_product(vac * 1j, vac) == pytest.approx(-1j)


def test_unregistered_mode_is_usage_error():
    """test that modes outside the registry are rejected"""
    with pytest.raises(UsageError):
        create(make_vacuum(ModeRegistry.of(Spatial.A)), B_V)


def test_project_pattern_partition_sums_to_one():
    """test that an exhaustive disjoint partition of photon numbers sums to 1"""
    reg = ModeRegistry.standard()
    state = create(make_vacuum(reg), A_V)
    state = evolve(state, PdcConfig(kappa_t=0.05, order=2))
    count_b = reg.counter([Spatial.B])
    total = 0.0
    for k in range(4):
        p, cond = project_pattern(state, lambda occ, k=k: count_b(occ) == k)
        total += p
        if cond is not None:
            assert cond.norm_sq() == pytest.approx(1.0, abs=1e-12)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_project_pattern_no_match():
    """test that an unmatched pattern gives probability 0 and no state"""
    p, cond = project_pattern(make_vacuum(REG), lambda occ: sum(occ) == 3)
    assert p == 0.0
    assert cond is None


def test_expectation_number():
    """test photon-number expectation on a two-term superposition"""
    state = create_linear(make_vacuum(REG), [(A_V, 0.6), (A_H, 0.8)])
    assert expectation_number(state, [A_V]) == pytest.approx(0.36)
    assert expectation_number(state, [A_V, A_H]) == pytest.approx(1.0)


def test_pruning_does_not_change_probabilities():
    """test that amplitude pruning moves probabilities by less than 1e-10"""
    reg = ModeRegistry.standard()
    cfg = PdcConfig(kappa_t=1e-6, order=2)
    count_b = reg.counter([Spatial.B])

    def probs():
        state = evolve(create(make_vacuum(reg), A_V), cfg)
        return [
            project_pattern(state, lambda o, k=k: count_b(o) == k)[0] for k in range(3)
        ]

    pruned = probs()
    with patch("stim_clone.fock.PRUNE_THRESHOLD", 0.0):
        exact = probs()
    for p, q in zip(pruned, exact):
        assert abs(p - q) < 1e-10


def test_state_is_immutable():
    """test that the term map cannot be mutated in place"""
    vac = make_vacuum(REG)
    with pytest.raises(TypeError):
        vac.terms[(1, 0, 0, 0)] = 1.0


def _mixed_state(seed):
    rng = np.random.default_rng(seed)
    occupations = [(0, 0, 0, 0), (1, 0, 0, 1), (2, 1, 0, 0), (0, 1, 3, 0), (1, 1, 1, 1)]
    amps = rng.normal(size=len(occupations)) + 1j * rng.normal(size=len(occupations))
    return FockState(REG, dict(zip(occupations, amps)))


@pytest.mark.parametrize("mode", [A_V, A_H, B_V, B_H])
def test_canonical_commutator(mode):
    """test (a a+ - a+ a) psi = psi on every mode"""
    psi = _mixed_state(3)
    lhs = annihilate(create(psi, mode), mode) - create(annihilate(psi, mode), mode)
    assert lhs.distance(psi) < 1e-12


def test_ladder_operators_are_linear():
    """test create and annihilate on a superposition against the summed parts"""
    psi, phi = _mixed_state(5), _mixed_state(6)
    alpha, beta = 0.3 - 0.4j, 1.1 + 0.2j
    mixed = psi.scale(alpha) + phi.scale(beta)
    for op in (create, annihilate):
        for mode in (A_V, B_H):
            parts = op(psi, mode).scale(alpha) + op(phi, mode).scale(beta)
            assert op(mixed, mode).distance(parts) < 1e-12
    expected = alpha.conjugate() * inner_product(psi, phi)
    expected += beta.conjugate() * inner_product(phi, phi)
    assert abs(inner_product(mixed, phi) - expected) < 1e-12
