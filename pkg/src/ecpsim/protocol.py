"""Entanglement concentration with one ancilla electron and a charge-detecting parity gate.

Only Bob acts.  Each round he mixes his half of the shared state with a
fresh ancilla on a spin-routing beam splitter and reads a charge detector:

* reading "1": the parties hold a GHZ state; Bob Hadamards and measures the
  spare electron, fixes the sign with a phase flip and announces success;
* reading "0": a second splitter restores one electron per rail, the same
  readout leaves a less-entangled pair with squared coefficients, and Bob
  tries again with an ancilla matched to them.

Electron ids: party ``k`` owns electron ``k`` (Alice 1, Bob 2); the ancilla
takes the next free id.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Protocol

from .elements import (
    DETECTOR,
    PBS_MAIN,
    PBS_RECOMBINE,
    apply_pbs,
    apply_spin_unitary,
    bit_flip,
    hadamard,
    measure_charge,
    measure_spin_z,
    phase_flip,
)
from .state import (
    DOWN,
    PRUNE_TOL,
    UP,
    MeasurementRecord,
    PureState,
    electron_in_mode,
    relabel_modes,
    tensor,
)

ALICE = 1
BOB = 2


class ProtocolError(ValueError):
    pass


class RandomSource(Protocol):
    def random(self) -> float: ...


@dataclass(frozen=True)
class SchmidtPair:
    """Coefficients of ``alpha|↑↑> + beta|↓↓>``; also used for the ancilla ``alpha|↑> + beta|↓>``."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        total = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(total - 1.0) > 1e-12:
            raise ProtocolError(f"|alpha|^2 + |beta|^2 = {total!r}, expected 1")

    @classmethod
    def from_alpha_sq(cls, alpha_sq: float) -> SchmidtPair:
        if not 0.0 <= alpha_sq <= 1.0:
            raise ProtocolError(f"alpha_sq={alpha_sq!r} is not a probability")
        return cls(math.sqrt(alpha_sq), math.sqrt(1.0 - alpha_sq))

    @property
    def alpha_sq(self) -> float:
        return abs(self.alpha) ** 2

    @property
    def degenerate(self) -> bool:
        return abs(self.alpha) < PRUNE_TOL or abs(self.beta) < PRUNE_TOL

    def squared(self) -> SchmidtPair:
        """Coefficients of the residual pair left by a failed round: (alpha^2, beta^2) renormalized."""
        a, b = self.alpha**2, self.beta**2
        norm = math.hypot(abs(a), abs(b))
        return SchmidtPair(a / norm, b / norm)

    def shifted(self, delta: float) -> SchmidtPair:
        """Same phases, mixing angle (alpha = cos theta) moved by ``delta`` radians.

        Models a miscalibrated ancilla source; valid for any round's coefficients.
        """
        if delta == 0:
            return self
        theta = math.atan2(abs(self.beta), abs(self.alpha)) + delta
        pa = self.alpha / abs(self.alpha) if self.alpha else 1.0
        pb = self.beta / abs(self.beta) if self.beta else 1.0
        return SchmidtPair(math.cos(theta) * pa, math.sin(theta) * pb)


def party_mode(party: int) -> str:
    return {ALICE: "a1", BOB: "b1"}.get(party, f"p{party}")


@functools.lru_cache(maxsize=128)
def prepare_ghz(c: SchmidtPair, n_parties: int) -> PureState:
    """``alpha|↑...↑> + beta|↓...↓>`` with party k's electron in ``party_mode(k)``."""
    if n_parties < 2:
        raise ProtocolError(f"n_parties must be >= 2, got {n_parties}")
    layout = [(k, party_mode(k)) for k in range(1, n_parties + 1)]
    return PureState.from_terms(
        {
            tuple((e, m, UP) for e, m in layout): c.alpha,
            tuple((e, m, DOWN) for e, m in layout): c.beta,
        }
    )


def prepare_pair(c: SchmidtPair, modes: tuple[str, str] = ("a1", "b1")) -> PureState:
    first, second = modes
    return PureState.from_terms(
        {
            ((ALICE, first, UP), (BOB, second, UP)): c.alpha,
            ((ALICE, first, DOWN), (BOB, second, DOWN)): c.beta,
        }
    )


@functools.lru_cache(maxsize=128)
def prepare_ancilla(c: SchmidtPair, mode: str = "b2", electron: int = 3) -> PureState:
    return PureState.from_terms({((electron, mode, UP),): c.alpha, ((electron, mode, DOWN),): c.beta})


class Branch(NamedTuple):
    """One Z-readout outcome after the phase correction has been applied."""

    spin_result: str
    probability: float
    state: PureState | None
    correction: str


def enter_parity_gate(shared: PureState, ancilla: SchmidtPair) -> PureState:
    """Bit-flipped ancilla plus Bob's electron, after the first splitter."""
    (bob_mode,) = shared.modes_of(BOB)
    shared = relabel_modes(shared, {bob_mode: "b1"})
    anc_id = max(shared.electrons) + 1
    anc = prepare_ancilla(ancilla, "b2", anc_id)
    anc = relabel_modes(apply_spin_unitary(anc, bit_flip(anc_id)), {"b2": "b3"})
    return apply_pbs(tensor(shared, anc), PBS_MAIN)


def _readout(s: PureState) -> tuple[Branch, ...]:
    spare = electron_in_mode(s, "c2")
    s = apply_spin_unitary(s, hadamard(spare))
    branches = []
    for rec in measure_spin_z(s, spare):
        if rec.post_state is None:
            branches.append(Branch(rec.outcome, 0.0, None, "none"))
        elif rec.outcome == DOWN.label:
            fixed = apply_spin_unitary(rec.post_state, phase_flip(BOB))
            branches.append(Branch(rec.outcome, rec.probability, fixed, "phase-flip"))
        else:
            branches.append(Branch(rec.outcome, rec.probability, rec.post_state, "none"))
    return tuple(branches)


@functools.lru_cache(maxsize=4096)
def parity_gate(shared: PureState, ancilla: SchmidtPair) -> tuple[MeasurementRecord, ...]:
    """Charge-detector records for ``shared`` entering the gate with the given ancilla."""
    return tuple(measure_charge(enter_parity_gate(shared, ancilla), DETECTOR))


@functools.lru_cache(maxsize=4096)
def finish_success(ghz: PureState) -> tuple[Branch, ...]:
    """Both readouts of the spare electron in c2 for the charge-"1" state."""
    return _readout(ghz)


@functools.lru_cache(maxsize=4096)
def recombine_failure(bunched: PureState) -> tuple[Branch, ...]:
    """Second splitter then the same readout, for the charge-"0" state."""
    s = relabel_modes(bunched, {"c1": "c1'", "c2": "c2'"})
    return _readout(apply_pbs(s, PBS_RECOMBINE))


def sample(outcomes, rng: RandomSource):
    """Pick one outcome with a single uniform draw, thresholds in declaration order."""
    u = rng.random()
    acc = 0.0
    chosen = None
    for outcome in outcomes:
        if outcome.probability <= 0.0:
            continue
        chosen = outcome
        acc += outcome.probability
        if u < acc:
            break
    if chosen is None:
        raise ProtocolError("no outcome has positive probability")
    return chosen


@dataclass(frozen=True)
class RoundOutcome:
    round_index: int
    charge_result: str
    charge_probability: float
    spin_result: str | None
    spin_probability: float | None
    branch_probability: float
    resulting_state: PureState
    correction_applied: str


@dataclass(frozen=True)
class ClassicalMessage:
    sender: int
    recipients: tuple[int, ...]
    content: str
    round_index: int


@dataclass(frozen=True)
class ProtocolReport:
    n_parties: int
    rounds: tuple[RoundOutcome, ...]
    messages: tuple[ClassicalMessage, ...]
    succeeded: bool
    final_state: PureState | None
    cumulative_success_probability: float

    @property
    def rounds_used(self) -> int:
        return len(self.rounds)


def run_round(
    shared: PureState,
    c: SchmidtPair,
    rng: RandomSource,
    *,
    ancilla: SchmidtPair | None = None,
    round_index: int = 1,
) -> RoundOutcome:
    """One pass through the parity gate.

    On charge "1" the returned state is the corrected maximally entangled
    state; on "0" it is the bunched state straight after the detector, to be
    handed to :func:`recycle_failure`.
    """
    if c.degenerate:
        raise ProtocolError("degenerate Schmidt pair: success probability is identically 0")
    charge: MeasurementRecord = sample(parity_gate(shared, ancilla or c), rng)
    if charge.outcome == "1":
        branch: Branch = sample(finish_success(charge.post_state), rng)
        return RoundOutcome(
            round_index,
            "1",
            charge.probability,
            branch.spin_result,
            branch.probability,
            charge.probability * branch.probability,
            branch.state,
            branch.correction,
        )
    return RoundOutcome(
        round_index, "0", charge.probability, None, None, charge.probability, charge.post_state, "none"
    )


class Recycled(NamedTuple):
    state: PureState
    pair: SchmidtPair
    spin_result: str
    spin_probability: float
    correction: str


def pair_from_state(s: PureState) -> SchmidtPair:
    """Read ``(alpha, beta)`` off a state ``alpha|↑...↑> + beta|↓...↓>``, global phase removed."""
    alpha = beta = 0j
    for config, amp in s.terms.items():
        spins = {slot.spin for slot in config}
        if spins == {UP}:
            alpha = amp
        elif spins == {DOWN}:
            beta = amp
        else:
            raise ProtocolError("state is not of the form alpha|↑...↑> + beta|↓...↓>")
    ref = alpha if abs(alpha) > 0 else beta
    phase = ref / abs(ref)
    alpha, beta = alpha / phase, beta / phase
    norm = math.hypot(abs(alpha), abs(beta))
    return SchmidtPair(alpha / norm, beta / norm)


def recycle_failure(outcome: RoundOutcome, rng: RandomSource) -> Recycled:
    """Turn a charge-"0" outcome into the next round's input pair."""
    if outcome.charge_result != "0":
        raise ProtocolError("recycle_failure needs a charge-0 outcome")
    branch: Branch = sample(recombine_failure(outcome.resulting_state), rng)
    return Recycled(branch.state, pair_from_state(branch.state), branch.spin_result, branch.probability, branch.correction)


def _recipients(n_parties: int) -> tuple[int, ...]:
    return tuple(k for k in range(1, n_parties + 1) if k != BOB)


def _check_run_args(n_parties: int, max_rounds: int) -> None:
    if not isinstance(n_parties, int) or n_parties < 2:
        raise ProtocolError(f"n_parties must be an integer >= 2, got {n_parties!r}")
    if not isinstance(max_rounds, int) or max_rounds < 1:
        raise ProtocolError(f"max_rounds must be an integer >= 1, got {max_rounds!r}")


@functools.lru_cache(maxsize=256)
def exact_success_curve(
    c: SchmidtPair, n_parties: int, max_rounds: int, ancilla_mismatch: float = 0.0
) -> tuple[float, ...]:
    """Exact probability of succeeding in round 1, 2, ... following the failure chain.

    Both readouts of a failed round leave the same residual pair once
    corrected, so the chain follows the first nonzero readout.
    """
    _check_run_args(n_parties, max_rounds)
    if c.degenerate:
        raise ProtocolError("degenerate Schmidt pair: success probability is identically 0")
    probs = []
    reach = 1.0
    shared, pair = prepare_ghz(c, n_parties), c
    for _ in range(max_rounds):
        success, failure = parity_gate(shared, pair.shifted(ancilla_mismatch))
        probs.append(reach * success.probability)
        reach *= failure.probability
        if failure.post_state is None:
            break
        branch = next(b for b in recombine_failure(failure.post_state) if b.state is not None)
        shared, pair = branch.state, pair_from_state(branch.state)
        if pair.degenerate:
            break
    return tuple(probs)


def run_multipartite(
    c: SchmidtPair,
    n_parties: int,
    max_rounds: int,
    rng: RandomSource,
    *,
    ancilla_mismatch: float = 0.0,
) -> ProtocolReport:
    """Concentrate an N-party state; Bob (party 2) is the only one who acts or talks.

    Stops at the first charge-"1" reading or after ``max_rounds``.  Exactly one
    message, from Bob to everyone else, closes the run.
    """
    _check_run_args(n_parties, max_rounds)
    cumulative = sum(exact_success_curve(c, n_parties, max_rounds, ancilla_mismatch))
    shared, pair = prepare_ghz(c, n_parties), c
    rounds: list[RoundOutcome] = []
    final_state = None
    content = None
    for k in range(1, max_rounds + 1):
        outcome = run_round(shared, pair, rng, ancilla=pair.shifted(ancilla_mismatch), round_index=k)
        if outcome.charge_result == "1":
            rounds.append(outcome)
            final_state = outcome.resulting_state
            content = "success-phase-corrected" if outcome.correction_applied == "phase-flip" else "success-keep"
            break
        rec = recycle_failure(outcome, rng)
        rounds.append(
            replace(
                outcome,
                spin_result=rec.spin_result,
                spin_probability=rec.spin_probability,
                branch_probability=outcome.charge_probability * rec.spin_probability,
                resulting_state=rec.state,
                correction_applied=rec.correction,
            )
        )
        shared, pair = rec.state, rec.pair
        if pair.degenerate:
            break
    if content is None:
        content = f"failure-round-{len(rounds)}"
    message = ClassicalMessage(BOB, _recipients(n_parties), content, len(rounds))
    return ProtocolReport(
        n_parties=n_parties,
        rounds=tuple(rounds),
        messages=(message,),
        succeeded=final_state is not None,
        final_state=final_state,
        cumulative_success_probability=cumulative,
    )


def run_multi_round(
    c: SchmidtPair, max_rounds: int, rng: RandomSource, *, ancilla_mismatch: float = 0.0
) -> ProtocolReport:
    return run_multipartite(c, 2, max_rounds, rng, ancilla_mismatch=ancilla_mismatch)
