"""Exact branch enumeration, closed-form round probabilities and Monte Carlo estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

from .protocol import (
    ProtocolError,
    SchmidtPair,
    finish_success,
    pair_from_state,
    parity_gate,
    prepare_ghz,
    recombine_failure,
    run_multipartite,
)
from .rng import stream
from .state import PureState, fidelity_up_to_phase, ghz_state, layout_of

CONSERVATION_TOL = 1e-9


@dataclass
class BranchNode:
    label: str
    probability: float
    round_index: int = 0
    state: PureState | None = None
    terminal: str | None = None  # "success" / "failure" on leaves
    children: list[BranchNode] = field(default_factory=list)

    def walk(self) -> Iterator[BranchNode]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class BranchTree:
    root: BranchNode
    pair: SchmidtPair
    n_parties: int
    max_rounds: int

    def leaves(self) -> list[BranchNode]:
        return [node for node in self.root.walk() if not node.children]

    def success_probability(self) -> float:
        return math.fsum(leaf.probability for leaf in self.leaves() if leaf.terminal == "success")

    def success_by_round(self) -> list[float]:
        out = [0.0] * self.max_rounds
        for leaf in self.leaves():
            if leaf.terminal == "success":
                out[leaf.round_index - 1] += leaf.probability
        return out

    def reach_probability(self, round_index: int) -> float:
        """Probability that round ``round_index`` is attempted at all."""
        return math.fsum(
            node.probability for node in self.root.walk() if node.round_index == round_index and node.label.endswith("start")
        )

    def mean_rounds_to_success(self) -> float:
        p = self.success_probability()
        if p == 0:
            return math.nan
        weighted = math.fsum(leaf.probability * leaf.round_index for leaf in self.leaves() if leaf.terminal == "success")
        return weighted / p

    def mean_success_fidelity(self) -> float:
        """Probability-weighted fidelity of success leaves with the GHZ state on their modes."""
        p = self.success_probability()
        if p == 0:
            return math.nan
        total = math.fsum(
            leaf.probability * fidelity_up_to_phase(leaf.state, ghz_state(layout_of(leaf.state)))
            for leaf in self.leaves()
            if leaf.terminal == "success" and leaf.state is not None
        )
        return total / p

    def conservation_error(self) -> float:
        """Largest |parent - sum(children)| in the tree; the root is checked against 1."""
        worst = abs(self.root.probability - 1.0)
        for node in self.root.walk():
            if node.children:
                worst = max(worst, abs(node.probability - math.fsum(c.probability for c in node.children)))
        return worst


def enumerate_branches(
    c: SchmidtPair, n_parties: int = 2, max_rounds: int = 1, ancilla_mismatch: float = 0.0
) -> BranchTree:
    """Expand every charge and spin outcome of every round without sampling."""
    if c.degenerate:
        raise ProtocolError("degenerate Schmidt pair: success probability is identically 0")
    if n_parties < 2 or max_rounds < 1:
        raise ProtocolError("need n_parties >= 2 and max_rounds >= 1")
    root = BranchNode("root", 1.0)
    _expand(root, prepare_ghz(c, n_parties), c, 1, max_rounds, ancilla_mismatch)
    return BranchTree(root, c, n_parties, max_rounds)


def _expand(parent: BranchNode, shared: PureState, pair: SchmidtPair, k: int, max_rounds: int, delta: float) -> None:
    start = BranchNode(f"round{k}:start", parent.probability, k, shared)
    parent.children.append(start)
    for charge in parity_gate(shared, pair.shifted(delta)):
        node = BranchNode(f"round{k}:charge={charge.outcome}", start.probability * charge.probability, k, charge.post_state)
        start.children.append(node)
        if charge.post_state is None:
            node.terminal = "success" if charge.outcome == "1" else "failure"
            continue
        if charge.outcome == "1":
            for b in finish_success(charge.post_state):
                node.children.append(
                    BranchNode(f"round{k}:spin={b.spin_result}", node.probability * b.probability, k, b.state, "success")
                )
            continue
        for b in recombine_failure(charge.post_state):
            child = BranchNode(f"round{k}:spin={b.spin_result}", node.probability * b.probability, k, b.state)
            node.children.append(child)
            if b.state is None:
                child.terminal = "failure"
                continue
            residual = pair_from_state(b.state)
            if k < max_rounds and not residual.degenerate:
                _expand(child, b.state, residual, k + 1, max_rounds, delta)
            else:
                child.terminal = "failure"


class RoundProbability(NamedTuple):
    round_index: int
    exact: float  # unconditional probability of succeeding in this round
    conditional: float  # given that this round is reached
    unnormalized: float  # 2|alpha beta|^(2k), read off unnormalized amplitudes


def residual_alpha_sq(alpha_sq: float, rounds_failed: int) -> float:
    """|alpha_k|^2 after ``rounds_failed`` failures: alpha^(2^k) renormalized, done in squares."""
    a, b = alpha_sq, 1.0 - alpha_sq
    for _ in range(rounds_failed):
        a, b = a * a, b * b
        total = a + b
        a, b = a / total, b / total
    return a


def success_probability_formula(c: SchmidtPair, round_k: int) -> RoundProbability:
    if round_k < 1:
        raise ValueError("round_k must be >= 1")
    reach = 1.0
    for j in range(1, round_k + 1):
        a = residual_alpha_sq(c.alpha_sq, j - 1)
        conditional = 2.0 * a * (1.0 - a)
        if j == round_k:
            break
        reach *= 1.0 - conditional
    unnormalized = 2.0 * (abs(c.alpha) * abs(c.beta)) ** (2 * round_k)
    return RoundProbability(round_k, reach * conditional, conditional, unnormalized)


def cumulative_success_formula(c: SchmidtPair, max_rounds: int) -> float:
    return math.fsum(success_probability_formula(c, k).exact for k in range(1, max_rounds + 1))


def discrepancy_report(c: SchmidtPair, round_k: int = 2) -> dict:
    """Exact round-k success probability next to the unnormalized-amplitude estimate."""
    formula = success_probability_formula(c, round_k)
    tree = enumerate_branches(c, 2, round_k)
    enumerated = tree.success_by_round()[round_k - 1]
    return {
        "alpha_sq": c.alpha_sq,
        "round": round_k,
        "unnormalized_estimate": formula.unnormalized,
        "exact_unconditional": enumerated,
        "exact_closed_form": formula.exact,
        "conditional": formula.conditional,
        "ratio": enumerated / formula.unnormalized if formula.unnormalized else math.nan,
    }


@dataclass(frozen=True)
class SweepRow:
    alpha_sq: float
    n_parties: int
    max_rounds: int
    exact_success: float
    mc_success: float
    mc_trials: int
    mc_stderr: float
    mean_rounds_to_success: float

    @property
    def flagged(self) -> bool:
        """True when the estimate sits more than 4 binomial standard errors from the exact value."""
        if self.mc_trials == 0:
            return False
        sigma = math.sqrt(self.exact_success * (1.0 - self.exact_success) / self.mc_trials)
        return abs(self.mc_success - self.exact_success) > 4.0 * sigma


def monte_carlo(
    c: SchmidtPair,
    n_parties: int = 2,
    max_rounds: int = 1,
    trials: int = 1,
    seed: int = 0,
    ancilla_mismatch: float = 0.0,
) -> SweepRow:
    """Run the sampled protocol ``trials`` times on one seeded stream.

    With ``trials == 0`` only the exact columns are filled; the Monte Carlo
    columns are NaN.  ``mean_rounds_to_success`` averages over successful
    trials only.
    """
    if trials < 0:
        raise ValueError("trials must be >= 0")
    exact = enumerate_branches(c, n_parties, max_rounds, ancilla_mismatch).success_probability()
    if trials == 0:
        return SweepRow(c.alpha_sq, n_parties, max_rounds, exact, math.nan, 0, math.nan, math.nan)
    rng = stream(seed)
    successes = 0
    rounds_total = 0
    for _ in range(trials):
        report = run_multipartite(c, n_parties, max_rounds, rng, ancilla_mismatch=ancilla_mismatch)
        if report.succeeded:
            successes += 1
            rounds_total += report.rounds_used
    p = successes / trials
    stderr = math.sqrt(p * (1.0 - p) / trials)
    mean_rounds = rounds_total / successes if successes else math.nan
    return SweepRow(c.alpha_sq, n_parties, max_rounds, exact, p, trials, stderr, mean_rounds)
