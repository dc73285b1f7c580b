"""Exit criteria for the build, one test (or parametrized group) per criterion.

Run with ``pytest tests/test_acceptance.py``; the terminal summary ends with a
``criterion N: PASS/FAIL`` line for each of them.
"""

import math
import random
import subprocess
import sys
import time

import numpy as np
import pytest

from ecpsim.analysis import discrepancy_report, enumerate_branches, monte_carlo
from ecpsim.cli import main
from ecpsim.elements import DETECTOR, measure_charge
from ecpsim.protocol import BOB, SchmidtPair, enter_parity_gate, prepare_ghz, prepare_pair, recycle_failure, run_multipartite, run_round
from ecpsim.rng import stream
from ecpsim.state import fidelity_up_to_phase, ghz_state, layout_of, measure_projective, occupation, schmidt_coefficients

import oracle

SWEEP = (0.1, 0.25, 0.5, 0.75, 0.9)


@pytest.mark.acceptance(1)
def test_round_one_success_probability():
    start = time.perf_counter()
    for a2 in SWEEP:
        tree = enumerate_branches(SchmidtPair.from_alpha_sq(a2), 2, 1)
        assert abs(tree.success_probability() - 2 * a2 * (1 - a2)) <= 1e-12
    assert time.perf_counter() - start < 1.0


@pytest.mark.acceptance(2)
@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_success_branches_are_maximally_entangled(n):
    for a2 in SWEEP:
        tree = enumerate_branches(SchmidtPair.from_alpha_sq(a2), n, 3)
        successes = [leaf for leaf in tree.leaves() if leaf.terminal == "success"]
        # both Z outcomes in every round
        assert {leaf.label.split("=")[1] for leaf in successes} == {"up", "down"}
        # each failed round forks on its own readout: 2 + 4 + 8 success leaves
        assert len(successes) == 2 + 4 + 8
        for leaf in successes:
            assert leaf.state.electron_count == n
            target = ghz_state(layout_of(leaf.state))
            assert abs(fidelity_up_to_phase(leaf.state, target) - 1.0) <= 1e-10


@pytest.mark.acceptance(3)
@pytest.mark.parametrize("alpha_sq", SWEEP)
def test_failure_branch_recursion(alpha_sq):
    class Draws:
        def __init__(self):
            self.rng = random.Random(alpha_sq)

        def random(self):
            return self.rng.random()

    class AlwaysFail:
        def random(self):
            return 1.0 - 1e-15

    c = SchmidtPair.from_alpha_sq(alpha_sq)
    shared, pair = prepare_pair(c), c
    for k in range(1, 5):
        rec = recycle_failure(run_round(shared, pair, AlwaysFail()), Draws())
        a, b = math.sqrt(alpha_sq) ** (2**k), math.sqrt(1 - alpha_sq) ** (2**k)
        norm = math.hypot(a, b)
        got = schmidt_coefficients(rec.state, ({1}, {BOB}))
        assert got == pytest.approx((max(a, b) / norm, min(a, b) / norm), abs=1e-10)
        shared, pair = rec.state, rec.pair


@pytest.mark.acceptance(4)
def test_maximally_entangled_fixed_point():
    bell = SchmidtPair.from_alpha_sq(0.5)
    tree = enumerate_branches(bell, 2, 10)
    per_round = tree.success_by_round()
    for k in range(1, 11):
        conditional = per_round[k - 1] / tree.reach_probability(k)
        assert abs(conditional - 0.5) <= 1e-12
        assert abs(math.fsum(per_round[:k]) - (1 - 2.0**-k)) <= 1e-12


@pytest.mark.acceptance(5)
def test_round_two_discrepancy_report(capsys):
    c = SchmidtPair.from_alpha_sq(0.8)
    a4, b4 = 0.8**2, 0.2**2
    expected = 2 * a4 * b4 / (a4 + b4)
    enumerated = enumerate_branches(c, 2, 2).success_by_round()[1]
    assert abs(enumerated - expected) <= 1e-12
    assert abs(oracle.success_by_round(0.8, 2, 2)[1] - expected) <= 1e-12

    report = discrepancy_report(c, 2)
    assert abs(report["unnormalized_estimate"] - 0.0512) <= 1e-12
    assert abs(report["exact_unconditional"] - expected) <= 1e-12

    assert main(["report", "--alpha-sq", "0.8", "--round", "2"]) == 0
    out = capsys.readouterr().out
    assert repr(report["unnormalized_estimate"]) in out
    assert repr(report["exact_unconditional"]) in out


@pytest.mark.acceptance(6)
def test_monte_carlo_consistency():
    start = time.perf_counter()
    for i, a2 in enumerate(SWEEP):
        row = monte_carlo(SchmidtPair.from_alpha_sq(a2), 2, 1, trials=100_000, seed=2024 + i)
        p = row.exact_success
        assert abs(row.mc_success - p) <= 4 * math.sqrt(p * (1 - p) / 1e5)
    assert time.perf_counter() - start < 30.0


@pytest.mark.acceptance(7)
def test_n_independence():
    for a2 in SWEEP:
        c = SchmidtPair.from_alpha_sq(a2)
        values = [enumerate_branches(c, n, 1).success_probability() for n in range(2, 9)]
        assert max(values) - min(values) <= 1e-12


@pytest.mark.acceptance(8)
@pytest.mark.parametrize("n", [2, 3, 5])
def test_charge_detection_is_nondemolition(n):
    c = SchmidtPair.from_alpha_sq(0.8)
    routed = enter_parity_gate(prepare_ghz(c, n), c)
    _, failure = measure_charge(routed, DETECTOR)
    assert failure.outcome == "0"
    occupancies = {occupation(config, "c1") for config in failure.post_state.terms}
    assert occupancies == {0, 2}

    projected = measure_projective(
        routed,
        [("0 or 2", lambda cfg: occupation(cfg, "c1") != 1), ("1", lambda cfg: occupation(cfg, "c1") == 1)],
    )[0]
    assert abs(projected.probability - failure.probability) <= 1e-12
    assert abs(fidelity_up_to_phase(failure.post_state, projected.post_state) - 1.0) <= 1e-12
    # the relative weight of the two bunched configurations is untouched
    weights = sorted(abs(a) ** 2 for a in failure.post_state.terms.values())
    assert weights == pytest.approx([0.04 / 0.68, 0.64 / 0.68], abs=1e-12)


@pytest.mark.acceptance(9)
def test_only_bob_sends_messages():
    rng = np.random.default_rng(9)
    for _ in range(10_000):
        c = SchmidtPair.from_alpha_sq(float(rng.uniform(0.01, 0.99)))
        n = int(rng.integers(2, 7))
        rounds = int(rng.integers(1, 6))
        report = run_multipartite(c, n, rounds, stream(int(rng.integers(2**63))))
        assert report.messages
        assert all(m.sender == BOB for m in report.messages)
        assert all(BOB not in m.recipients for m in report.messages)


@pytest.mark.acceptance(10)
def test_identical_config_gives_identical_csv():
    argv = [sys.executable, "-m", "ecpsim", "sweep", "--sweep", "0.25,0.5,0.9", "--rounds", "1,3",
            "--n-parties", "3", "--trials", "20000", "--seed", "31"]
    first = subprocess.run(argv, capture_output=True, check=True).stdout
    second = subprocess.run(argv, capture_output=True, check=True).stdout
    assert first and first == second


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
