"""tests for stim_clone.detection module"""

import math

import numpy as np
import pytest

from stim_clone.detection import (
    ALL_PATTERNS,
    BASIS_REFERENCE,
    TRIPLE,
    AnalyzerConfig,
    Basis,
    Detector,
    DetectorModel,
    EventClass,
    OutcomeTable,
    Scheme,
    classify,
    outcome_probabilities,
    sample_events,
)
from stim_clone.errors import ConfigurationError, UsageError
from stim_clone.fock import (
    A_H,
    A_V,
    B_H,
    B_V,
    ModeRegistry,
    Spatial,
    create,
    make_vacuum,
)
from stim_clone.optics import apply_transform, basis_change_jones, jones_element

REG = ModeRegistry.standard()
X = frozenset({Detector.TRIGGER})
Y = frozenset({Detector.D2})


def _state(*modes):
    state = make_vacuum(REG)
    for mode in modes:
        state = create(state, mode)
    return state.scale(1.0 / math.sqrt(state.norm_sq()))


def test_pbs_scheme_detects_orthogonal_pair():
    """test |1,1>_a |1,0>_b under the pbs scheme clicks all three detectors"""
    table = outcome_probabilities(
        _state(A_V, A_H, B_V),
        AnalyzerConfig(Basis.LINEAR_VH, Scheme.PBS_COINCIDENCE),
        DetectorModel(efficiency=1.0),
    )
    assert table.probability(TRIPLE) == pytest.approx(1.0, abs=1e-12)


def test_polarizer_bs_scheme_splits_half():
    """test |2,0>_a |0,1>_b gives a triple coincidence half the time"""
    table = outcome_probabilities(
        _state(A_V, A_V, B_H),
        AnalyzerConfig(Basis.LINEAR_VH, Scheme.POLARIZER_PLUS_BS),
        DetectorModel(efficiency=1.0),
    )
    assert table.probability(TRIPLE) == pytest.approx(0.5, abs=1e-12)
    p = table.probability({Detector.TRIGGER, Detector.D2})
    assert p == pytest.approx(0.25, abs=1e-12)


def test_zero_efficiency_never_clicks():
    """test that blind detectors only report the empty pattern"""
    table = outcome_probabilities(
        _state(A_V, A_V, B_H), AnalyzerConfig(), DetectorModel(efficiency=0.0)
    )
    assert table.probability(()) == pytest.approx(1.0, abs=1e-12)


def test_threshold_detector_efficiency():
    """test the three-fold rate scales as efficiency cubed"""
    eta = 0.1
    table = outcome_probabilities(
        _state(A_V, A_H, B_V),
        AnalyzerConfig(Basis.LINEAR_VH, Scheme.PBS_COINCIDENCE),
        DetectorModel(efficiency=eta),
    )
    assert table.probability(TRIPLE) == pytest.approx(eta**3, rel=1e-12)
    assert table.marginal(Detector.TRIGGER) == pytest.approx(eta, rel=1e-12)


def test_click_probability_with_dark_counts():
    """test 1 - (1 - d)(1 - eta)^n"""
    det = DetectorModel(efficiency=0.5, dark_count_prob=0.1)
    assert det.click_probability(0) == pytest.approx(0.1)
    assert det.click_probability(2) == pytest.approx(1 - 0.9 * 0.25)


def test_detector_model_validation():
    """test efficiency range checks"""
    with pytest.raises(ConfigurationError):
        DetectorModel(efficiency=1.1)


def test_unnormalized_state_rejected():
    """test that outcome probabilities need a normalized state"""
    state = create(create(make_vacuum(REG), A_V), A_V)
    with pytest.raises(UsageError):
        outcome_probabilities(state, AnalyzerConfig(), DetectorModel())


@pytest.mark.parametrize("basis", list(Basis))
def test_waveplates_map_reference_to_vertical(basis):
    """test that each analyzer turns its reference polarization into a v photon at D2"""
    v, h = BASIS_REFERENCE[basis]
    ref = apply_transform(
        _state(A_V), jones_element(basis_change_jones((v, h)).conj().T, (Spatial.A,))
    )
    analyzer = AnalyzerConfig(basis, Scheme.PBS_COINCIDENCE)
    table = outcome_probabilities(ref, analyzer, DetectorModel(efficiency=1.0))
    assert table.probability({Detector.D2}) == pytest.approx(1.0, abs=1e-12)


def test_outcome_table_validation():
    """test sum and pattern checks"""
    with pytest.raises(UsageError):
        OutcomeTable({X: 0.4, Y: 0.4})
    with pytest.raises(UsageError):
        OutcomeTable({frozenset({"nope"}): 1.0})
    table = OutcomeTable({X: 1.0})
    assert len(table.probabilities) == len(ALL_PATTERNS)


def test_outcome_table_mix():
    """test a weighted classical mixture"""
    parts = [OutcomeTable({X: 1.0}), OutcomeTable({Y: 1.0})]
    mixed = OutcomeTable.mix(parts, [3.0, 1.0])
    assert mixed.probability(X) == pytest.approx(0.75)
    assert mixed.probability(Y) == pytest.approx(0.25)


def test_classify():
    """test event classes of click patterns"""
    assert classify(TRIPLE, Scheme.POLARIZER_PLUS_BS) is EventClass.N20
    assert classify(TRIPLE, Scheme.PBS_COINCIDENCE) is EventClass.N11
    pbs, pol = Scheme.PBS_COINCIDENCE, Scheme.POLARIZER_PLUS_BS
    assert classify({Detector.TRIGGER}, pbs) is EventClass.TRIGGER_ONLY
    assert classify({Detector.D2, Detector.D3}, pol) is EventClass.OTHER


def test_sample_events_no_clicks():
    """test that a no-click table yields zero counts"""
    counts = sample_events(OutcomeTable({(): 1.0}), 1000, 1)
    assert counts.count(TRIPLE) == 0
    assert counts.count(()) == 1000


def test_sample_events_binomial_spread():
    """test two equiprobable patterns over 1e6 pulses stay within 5 sigma"""
    counts = sample_events(OutcomeTable({X: 0.5, Y: 0.5}), 10**6, 42)
    sigma = math.sqrt(10**6 * 0.25)
    assert abs(counts.count(X) - 5e5) < 5 * sigma
    assert counts.count(X) + counts.count(Y) == 10**6


def test_sample_events_deterministic():
    """test that a repeated seed gives identical counts"""
    table = OutcomeTable({X: 0.3, Y: 0.2, (): 0.5})
    first = sample_events(table, 5000, np.random.SeedSequence([7, 1, 2]))
    second = sample_events(table, 5000, np.random.SeedSequence([7, 1, 2]))
    assert first == second


def test_sample_events_rejects_zero_pulses():
    """test pulse count validation"""
    with pytest.raises(UsageError):
        sample_events(OutcomeTable({X: 1.0}), 0, 1)


def test_sampled_counts_add():
    """test merging of batches"""
    table = OutcomeTable({X: 0.5, Y: 0.5})
    total = sample_events(table, 100, 1) + sample_events(table, 50, 2)
    assert total.pulses == 150
    assert total.count(X) + total.count(Y) == 150
    assert total.marginal(Detector.TRIGGER) == total.count(X)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_sampled_frequencies_match_exact_table(scheme):
    """test 1e5-pulse batches against the exact table of a stimulated state"""
    stimulated = create(create(create(make_vacuum(REG), A_V), A_V), B_H)
    spontaneous = create(create(create(make_vacuum(REG), A_V), A_H), B_V)
    state = stimulated - spontaneous
    state = state.scale(1.0 / math.sqrt(state.norm_sq()))
    table = outcome_probabilities(
        state, AnalyzerConfig(Basis.LINEAR_VH, scheme), DetectorModel(efficiency=0.6)
    )
    pulses = 10**5
    for batch in range(3):
        counts = sample_events(table, pulses, np.random.SeedSequence([11, batch]))
        for pattern in ALL_PATTERNS:
            p = table.probability(pattern)
            sigma = math.sqrt(pulses * p * (1.0 - p))
            assert abs(counts.count(pattern) - pulses * p) <= 4 * sigma
