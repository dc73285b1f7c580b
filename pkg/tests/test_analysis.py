import math

import pytest

from ecpsim.analysis import (
    SweepRow,
    cumulative_success_formula,
    discrepancy_report,
    enumerate_branches,
    monte_carlo,
    residual_alpha_sq,
    success_probability_formula,
)
from ecpsim.protocol import ProtocolError, SchmidtPair

import oracle

C08 = SchmidtPair.from_alpha_sq(0.8)
BELL = SchmidtPair.from_alpha_sq(0.5)


def test_enumeration_single_round():
    tree = enumerate_branches(BELL, 2, 1)
    success = [l.probability for l in tree.leaves() if l.terminal == "success"]
    failure = [l.probability for l in tree.leaves() if l.terminal == "failure"]
    assert math.fsum(success) == pytest.approx(0.5, abs=1e-12)
    assert math.fsum(failure) == pytest.approx(0.5, abs=1e-12)
    assert enumerate_branches(C08).success_probability() == pytest.approx(0.32, abs=1e-12)


@pytest.mark.parametrize("alpha_sq", [0.05, 0.3, 0.5, 0.8, 0.97])
@pytest.mark.parametrize("rounds", [1, 3, 5])
def test_leaf_probabilities_conserve(alpha_sq, rounds):
    tree = enumerate_branches(SchmidtPair.from_alpha_sq(alpha_sq), 3, rounds)
    assert math.fsum(l.probability for l in tree.leaves()) == pytest.approx(1.0, abs=1e-9)
    assert tree.conservation_error() < 1e-9


def test_enumeration_matches_dense_oracle():
    for alpha_sq in (0.2, 0.8):
        for n in (2, 4):
            tree = enumerate_branches(SchmidtPair.from_alpha_sq(alpha_sq), n, 3)
            assert tree.success_by_round() == pytest.approx(oracle.success_by_round(alpha_sq, n, 3), abs=1e-12)


def test_reach_probability():
    tree = enumerate_branches(C08, 2, 3)
    assert tree.reach_probability(1) == pytest.approx(1.0)
    assert tree.reach_probability(2) == pytest.approx(0.68, abs=1e-12)


def test_formula_round_one_and_two():
    assert success_probability_formula(C08, 1).exact == pytest.approx(0.32, abs=1e-12)
    assert success_probability_formula(BELL, 1).exact == pytest.approx(0.5, abs=1e-12)
    two = success_probability_formula(C08, 2)
    assert two.unnormalized == pytest.approx(0.0512, abs=1e-12)
    assert two.exact == pytest.approx(32 / 425, abs=1e-12)
    assert two.exact == pytest.approx(2 * 0.8**2 * 0.2**2 / (0.8**2 + 0.2**2), abs=1e-12)
    assert two.conditional == pytest.approx(two.exact / 0.68, abs=1e-12)


@pytest.mark.parametrize("alpha_sq", [0.1, 0.45, 0.7, 0.99])
def test_formula_agrees_with_enumeration(alpha_sq):
    c = SchmidtPair.from_alpha_sq(alpha_sq)
    tree = enumerate_branches(c, 2, 5)
    formula = [success_probability_formula(c, k).exact for k in range(1, 6)]
    assert tree.success_by_round() == pytest.approx(formula, abs=1e-12)
    assert cumulative_success_formula(c, 5) == pytest.approx(tree.success_probability(), abs=1e-12)


def test_residual_recursion_matches_powers():
    for k in range(5):
        a, b = 0.8 ** (2**k), 0.2 ** (2**k)
        assert residual_alpha_sq(0.8, k) == pytest.approx(a / (a + b), abs=1e-15)


def test_discrepancy_report_contains_both_numbers():
    report = discrepancy_report(C08, 2)
    assert report["unnormalized_estimate"] == pytest.approx(0.0512, abs=1e-12)
    assert report["exact_unconditional"] == pytest.approx(32 / 425, abs=1e-12)
    assert report["exact_closed_form"] == pytest.approx(report["exact_unconditional"], abs=1e-15)


def test_n_independence_of_round_one():
    values = [enumerate_branches(C08, n, 1).success_probability() for n in range(2, 9)]
    assert max(values) - min(values) <= 1e-12


def test_mean_rounds():
    tree = enumerate_branches(BELL, 2, 2)
    # success in round 1 w.p. 1/2, round 2 w.p. 1/4
    assert tree.mean_rounds_to_success() == pytest.approx((0.5 + 2 * 0.25) / 0.75)


def test_mean_success_fidelity():
    assert enumerate_branches(C08, 3, 2).mean_success_fidelity() == pytest.approx(1.0, abs=1e-12)
    assert enumerate_branches(C08, 2, 1, ancilla_mismatch=0.1).mean_success_fidelity() < 0.99


def test_monte_carlo_statistics():
    row = monte_carlo(C08, 2, 1, trials=100_000, seed=3)
    assert row.exact_success == pytest.approx(0.32, abs=1e-12)
    assert abs(row.mc_success - 0.32) <= 4 * 0.00148
    assert row.mc_stderr == pytest.approx(math.sqrt(row.mc_success * (1 - row.mc_success) / 1e5))
    assert row.mean_rounds_to_success == 1.0
    assert not row.flagged


def test_monte_carlo_small_and_deterministic():
    row = monte_carlo(C08, 3, 4, trials=1, seed=9)
    assert row.mc_success in (0.0, 1.0)
    assert monte_carlo(C08, 3, 4, trials=500, seed=9) == monte_carlo(C08, 3, 4, trials=500, seed=9)
    assert monte_carlo(C08, 3, 4, trials=500, seed=9) != monte_carlo(C08, 3, 4, trials=500, seed=10)


def test_monte_carlo_exact_only():
    row = monte_carlo(C08, 2, 2, trials=0)
    assert row.mc_trials == 0 and math.isnan(row.mc_success)
    with pytest.raises(ValueError):
        monte_carlo(C08, trials=-1)


def test_flagging():
    row = SweepRow(0.8, 2, 1, 0.32, 0.34, 100_000, 0.0015, 1.0)
    assert row.flagged


def test_oracle_sampler_agreement_over_sweep():
    points = [(a, n, r) for a in (0.2, 0.5, 0.65, 0.9) for n in (2, 4) for r in (1, 3)]
    flagged = 0
    for i, (a, n, r) in enumerate(points):
        flagged += monte_carlo(SchmidtPair.from_alpha_sq(a), n, r, trials=4000, seed=100 + i).flagged
    assert flagged <= 0.01 * len(points)


def test_degenerate_rejected():
    with pytest.raises(ProtocolError):
        enumerate_branches(SchmidtPair(1, 0))
