"""Circuit elements: spin-routing beam splitters, single-spin gates, Z readout and the charge detector."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .state import (
    DOWN,
    UP,
    MeasurementRecord,
    PureState,
    Slot,
    Spin,
    StateError,
    format_configuration,
    occupation,
)


@dataclass(frozen=True)
class PbsSpec:
    """Polarizing beam splitter for spins.

    ``routing`` sends each ``(in_port, spin)`` to an output port.  Electrons
    leaving the splitter are identical carriers, so after routing their ids
    are reassigned in (mode, spin) order; this keeps "the electron in c2"
    a well-defined label across superposed terms.
    """

    in_ports: tuple[str, str]
    out_ports: tuple[str, str]
    routing: Mapping[tuple[str, Spin], str]

    def __post_init__(self):
        if len(set(self.in_ports)) != 2 or len(set(self.out_ports)) != 2:
            raise ValueError("a PBS needs two distinct input and two distinct output ports")
        routing = {(port, Spin(spin)): out for (port, spin), out in self.routing.items()}
        for port in self.in_ports:
            for spin in Spin:
                if (port, spin) not in routing:
                    raise ValueError(f"routing is missing ({port}, {spin.label})")
                if routing[(port, spin)] not in self.out_ports:
                    raise ValueError(f"({port}, {spin.label}) routed to unknown port {routing[(port, spin)]!r}")
        if len(routing) != 4:
            raise ValueError("routing has entries for ports that are not inputs")
        first, second = self.in_ports
        for spin in Spin:
            if routing[(first, spin)] == routing[(second, spin)]:
                raise ValueError(f"{spin.label} from both inputs exits the same port")
        object.__setattr__(self, "routing", routing)

    def inverse(self) -> PbsSpec:
        return PbsSpec(
            self.out_ports,
            self.in_ports,
            {(out, spin): port for (port, spin), out in self.routing.items()},
        )


@dataclass(frozen=True)
class ChargeDetectorSpec:
    """Charge counter on one mode; 0 and 2 occupants give the same reading."""

    monitored_mode: str
    outcome_map: Mapping[int, str] = field(default_factory=lambda: {1: "1", 0: "0", 2: "0"})

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.outcome_map.values()), key=lambda label: (label != "1", label)))


@dataclass(frozen=True, eq=False)
class SpinUnitary:
    matrix: np.ndarray
    electron: int
    name: str = "U"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"spin unitary must be 2x2, got {m.shape}")
        if not np.allclose(m @ m.conj().T, np.eye(2), rtol=0.0, atol=1e-12):
            raise ValueError(f"{self.name} is not unitary")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "_coef", tuple(tuple(complex(x) for x in row) for row in m))


_SQRT_HALF = 1.0 / np.sqrt(2.0)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
HADAMARD = _SQRT_HALF * np.array([[1, 1], [1, -1]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@functools.lru_cache(maxsize=None)
def bit_flip(electron: int) -> SpinUnitary:
    return SpinUnitary(PAULI_X, electron, "bit-flip")


@functools.lru_cache(maxsize=None)
def hadamard(electron: int) -> SpinUnitary:
    return SpinUnitary(HADAMARD, electron, "hadamard")


@functools.lru_cache(maxsize=None)
def phase_flip(electron: int) -> SpinUnitary:
    return SpinUnitary(PAULI_Z, electron, "phase-flip")


# Bob's splitter: the pair electron enters at b1, the ancilla at b3.
PBS_MAIN = PbsSpec(
    ("b1", "b3"),
    ("c1", "c2"),
    {("b1", UP): "c2", ("b1", DOWN): "c1", ("b3", UP): "c1", ("b3", DOWN): "c2"},
)

# Second splitter of the parity gate; turns bunched pairs into one electron per rail.
PBS_RECOMBINE = PbsSpec(
    ("c1'", "c2'"),
    ("c1", "c2"),
    {("c1'", UP): "c2", ("c1'", DOWN): "c1", ("c2'", UP): "c1", ("c2'", DOWN): "c2"},
)

DETECTOR = ChargeDetectorSpec("c1")


def apply_pbs(s: PureState, pbs: PbsSpec) -> PureState:
    ports = set(pbs.in_ports)
    routing = pbs.routing
    terms: dict = {}
    for config, amp in s.terms.items():
        kept = []
        routed = []
        for slot in config:
            if slot.mode in ports:
                routed.append(slot)
            else:
                kept.append(slot)
        if not routed:
            raise StateError(f"no electron enters the PBS in {format_configuration(config)}")
        ids = sorted(slot.electron for slot in routed)
        outs = sorted((routing[(slot.mode, slot.spin)], slot.spin, slot.electron) for slot in routed)
        new = tuple(sorted(kept + [Slot(e, mode, spin) for e, (mode, spin, _) in zip(ids, outs)]))
        terms[new] = terms.get(new, 0j) + amp
    return PureState.assemble(terms, s.electrons)


def apply_spin_unitary(s: PureState, u: SpinUnitary) -> PureState:
    if u.electron not in s.electrons:
        raise StateError(f"electron {u.electron} is not part of the state")
    m = u._coef
    terms: dict = {}
    for config, amp in s.terms.items():
        idx = next(i for i, slot in enumerate(config) if slot.electron == u.electron)
        slot = config[idx]
        for spin in Spin:
            coef = m[spin][slot.spin]
            if coef == 0:
                continue
            new = config[:idx] + (Slot(slot.electron, slot.mode, spin),) + config[idx + 1 :]
            terms[new] = terms.get(new, 0j) + coef * amp
    return PureState.assemble(terms, s.electrons)


def measure_charge(s: PureState, det: ChargeDetectorSpec = DETECTOR) -> list[MeasurementRecord]:
    """Coarse-grained charge count on ``det.monitored_mode``.

    Records come back in label order ("1" first).  Configurations sharing a
    label stay in coherent superposition; spins are not touched.
    """
    mode = det.monitored_mode
    outcome_map = det.outcome_map
    labels = det.labels
    buckets: dict = {label: {} for label in labels}
    for config, amp in s.terms.items():
        count = occupation(config, mode)
        if count not in outcome_map:
            raise StateError(f"detector has no reading for {count} electrons in {format_configuration(config)}")
        buckets[outcome_map[count]][config] = amp
    return [
        MeasurementRecord(label, sum(abs(a) ** 2 for a in bucket.values()), PureState.assemble(bucket, s.electrons))
        if bucket
        else MeasurementRecord(label, 0.0, None)
        for label, bucket in buckets.items()
    ]


def measure_spin_z(s: PureState, electron: int) -> list[MeasurementRecord]:
    """Z-basis readout of one electron, which is removed from the post-measurement states."""
    if electron not in s.electrons:
        raise StateError(f"electron {electron} is not part of the state")
    remaining = s.electrons - {electron}
    buckets: tuple[dict, dict] = ({}, {})
    for config, amp in s.terms.items():
        spin = next(slot.spin for slot in config if slot.electron == electron)
        rest = tuple(slot for slot in config if slot.electron != electron)
        buckets[spin][rest] = amp
    records = []
    for spin in Spin:
        bucket = buckets[spin]
        if not bucket:
            records.append(MeasurementRecord(spin.label, 0.0, None))
            continue
        p = sum(abs(a) ** 2 for a in bucket.values())
        post = PureState.assemble(bucket, remaining) if remaining else None
        records.append(MeasurementRecord(spin.label, p, post))
    return records
