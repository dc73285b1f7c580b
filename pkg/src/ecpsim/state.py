"""Sparse pure states of labeled spin-1/2 electrons sitting in named spatial modes.

A basis configuration lists every electron as ``(electron, mode, spin)``; a
:class:`PureState` maps configurations to complex amplitudes.  States are
immutable and always stored normalized; measurement probabilities travel
separately in :class:`MeasurementRecord`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

NORM_TOL = 1e-9
PRUNE_TOL = 1e-12
FIDELITY_TOL = 1e-10


class StateError(ValueError):
    """Raised when an operation is applied to states it cannot act on."""


class Spin(enum.IntEnum):
    UP = 0
    DOWN = 1

    @property
    def label(self) -> str:
        return "up" if self is Spin.UP else "down"

    def flipped(self) -> Spin:
        return Spin.DOWN if self is Spin.UP else Spin.UP


UP = Spin.UP
DOWN = Spin.DOWN


class Slot(NamedTuple):
    electron: int
    mode: str
    spin: Spin


# A configuration is a tuple of slots sorted by electron id.
Configuration = tuple


def configuration(slots: Iterable[Sequence]) -> Configuration:
    """Build a canonical configuration from ``(electron, mode, spin)`` triples."""
    out = tuple(sorted(Slot(int(e), str(m), Spin(s)) for e, m, s in slots))
    ids = [slot.electron for slot in out]
    if len(set(ids)) != len(ids):
        raise StateError(f"duplicate electron ids in configuration: {ids}")
    for slot in out:
        if not slot.mode:
            raise StateError("mode labels must be nonempty")
    return out


def occupation(config: Configuration, mode: str) -> int:
    return sum(1 for slot in config if slot.mode == mode)


def format_configuration(config: Configuration) -> str:
    arrows = {UP: "↑", DOWN: "↓"}
    return "".join(f"|{arrows[s.spin]}⟩_{s.mode}[e{s.electron}]" for s in config)


@dataclass(frozen=True)
class PureState:
    """Normalized superposition of configurations sharing one electron-id set.

    Use :meth:`from_terms` to build one; the bare constructor performs no
    validation.
    """

    terms: Mapping[Configuration, complex]
    electrons: frozenset

    @classmethod
    def from_terms(cls, terms: Mapping[Configuration, complex] | Iterable[tuple]) -> PureState:
        """Validate, prune and normalize a configuration -> amplitude mapping.

        Keys may be canonical configurations or any iterable of
        ``(electron, mode, spin)`` triples.
        """
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Configuration, complex] = {}
        electrons = None
        for key, amp in items:
            config = configuration(key)
            ids = frozenset(slot.electron for slot in config)
            if electrons is None:
                electrons = ids
            elif ids != electrons:
                raise StateError(
                    f"configuration {format_configuration(config)} has electrons "
                    f"{sorted(ids)}, expected {sorted(electrons)}"
                )
            acc[config] = acc.get(config, 0j) + complex(amp)
        if electrons is None:
            raise StateError("a state needs at least one configuration")
        return _normalized(acc, electrons)

    @classmethod
    def assemble(cls, terms: dict, electrons: frozenset) -> PureState:
        """Normalize and prune canonical terms already known to share ``electrons``."""
        return _normalized(terms, electrons)

    @classmethod
    def basis(cls, slots: Iterable[Sequence]) -> PureState:
        return cls.from_terms({configuration(slots): 1.0})

    @property
    def electron_count(self) -> int:
        return len(self.electrons)

    def norm_sq(self) -> float:
        return sum(abs(a) ** 2 for a in self.terms.values())

    def amplitude(self, slots: Iterable[Sequence]) -> complex:
        return self.terms.get(configuration(slots), 0j)

    def modes_of(self, electron: int) -> set[str]:
        return {slot.mode for config in self.terms for slot in config if slot.electron == electron}

    def __hash__(self) -> int:
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((frozenset(self.terms.items()), self.electrons))
            object.__setattr__(self, "_hash", h)
        return h

    def __str__(self) -> str:
        parts = [
            f"({amp.real:+.6g}{amp.imag:+.6g}j){format_configuration(c)}"
            for c, amp in sorted(self.terms.items())
        ]
        return " ".join(parts)


def _normalized(acc: dict, electrons: frozenset) -> PureState:
    total = sum(abs(a) ** 2 for a in acc.values())
    if total <= 0.0:
        raise StateError("state has zero norm")
    scale = 1.0 / math.sqrt(total)
    out = {}
    for config, amp in acc.items():
        amp = amp * scale
        if abs(amp) >= PRUNE_TOL:
            out[config] = amp
    if len(out) != len(acc):
        if not out:
            raise StateError("every amplitude fell below the pruning threshold")
        rescale = 1.0 / math.sqrt(sum(abs(a) ** 2 for a in out.values()))
        out = {c: a * rescale for c, a in out.items()}
    return PureState(out, electrons)


@dataclass(frozen=True)
class MeasurementRecord:
    outcome: str
    probability: float
    post_state: PureState | None  # None marks a zero-probability outcome


def tensor(a: PureState, b: PureState) -> PureState:
    """Product state of two states on disjoint electron sets."""
    shared = a.electrons & b.electrons
    if shared:
        raise StateError(f"cannot tensor states sharing electrons {sorted(shared)}")
    terms = {}
    for ca, xa in a.terms.items():
        for cb, xb in b.terms.items():
            terms[tuple(sorted(ca + cb))] = xa * xb
    return _normalized(terms, a.electrons | b.electrons)


Predicate = Callable[[Configuration], bool]


def measure_projective(s: PureState, partition: Sequence[tuple[str, Predicate]]) -> list[MeasurementRecord]:
    """Projective measurement onto the subspaces selected by ``partition``.

    Every configuration in the support must satisfy exactly one predicate.
    Outcomes are returned in partition order; an outcome with no support gets
    probability 0 and ``post_state=None``.
    """
    buckets: list[dict] = [{} for _ in partition]
    for config, amp in s.terms.items():
        hits = [i for i, (_, pred) in enumerate(partition) if pred(config)]
        if not hits:
            raise StateError(f"configuration {format_configuration(config)} matches no outcome")
        if len(hits) > 1:
            labels = [partition[i][0] for i in hits]
            raise StateError(f"configuration {format_configuration(config)} matches several outcomes {labels}")
        buckets[hits[0]][config] = amp
    return [_record(label, bucket, s.electrons) for (label, _), bucket in zip(partition, buckets)]


def _record(label: str, bucket: dict, electrons: frozenset) -> MeasurementRecord:
    p = sum(abs(a) ** 2 for a in bucket.values())
    if not bucket:
        return MeasurementRecord(label, 0.0, None)
    return MeasurementRecord(label, p, _normalized(bucket, electrons))


def overlap(a: PureState, b: PureState) -> complex:
    """Inner product <a|b>."""
    if a.electrons != b.electrons:
        raise StateError(f"electron sets differ: {sorted(a.electrons)} vs {sorted(b.electrons)}")
    acc = 0j
    for config, amp in a.terms.items():
        other = b.terms.get(config)
        if other is not None:
            acc += amp.conjugate() * other
    return acc


def fidelity_up_to_phase(a: PureState, b: PureState) -> float:
    """|<a|b>|^2, clipped to [0, 1]."""
    return min(1.0, abs(overlap(a, b)) ** 2)


def schmidt_coefficients(s: PureState, cut: tuple[Iterable[int], Iterable[int]]) -> tuple[float, float]:
    """Schmidt coefficients ``(l1, l2)``, ``l1 >= l2``, across a bipartition of electrons.

    Only rank <= 2 cuts are supported; anything larger raises :class:`StateError`.
    """
    left, right = frozenset(cut[0]), frozenset(cut[1])
    if left & right:
        raise StateError("the two sides of the cut overlap")
    if left | right != s.electrons:
        raise StateError(f"cut {sorted(left)} | {sorted(right)} does not cover electrons {sorted(s.electrons)}")
    rows: dict = {}
    cols: dict = {}
    entries = []
    for config, amp in s.terms.items():
        r = tuple(slot for slot in config if slot.electron in left)
        c = tuple(slot for slot in config if slot.electron in right)
        entries.append((rows.setdefault(r, len(rows)), cols.setdefault(c, len(cols)), amp))
    mat = np.zeros((len(rows), len(cols)), dtype=complex)
    for i, j, amp in entries:
        mat[i, j] = amp
    sv = np.linalg.svd(mat, compute_uv=False)
    if np.count_nonzero(sv > 1e-9) > 2:
        raise StateError(f"Schmidt rank {np.count_nonzero(sv > 1e-9)} exceeds 2 across this cut")
    sv = list(sv) + [0.0, 0.0]
    l1, l2 = float(sv[0]), float(sv[1])
    norm = math.hypot(l1, l2)
    return l1 / norm, l2 / norm


def relabel_modes(s: PureState, mapping: Mapping[str, str]) -> PureState:
    """Move electrons between modes (free propagation); spins and amplitudes untouched."""
    terms = {
        tuple(Slot(e, mapping.get(m, m), sp) for e, m, sp in config): amp
        for config, amp in s.terms.items()
    }
    return PureState(terms, s.electrons)


def electron_in_mode(s: PureState, mode: str) -> int:
    """Id of the single electron occupying ``mode`` in every configuration."""
    found = set()
    for config in s.terms:
        ids = [slot.electron for slot in config if slot.mode == mode]
        if len(ids) != 1:
            raise StateError(f"mode {mode!r} holds {len(ids)} electrons in {format_configuration(config)}")
        found.add(ids[0])
    if len(found) != 1:
        raise StateError(f"mode {mode!r} is occupied by different electrons across terms: {sorted(found)}")
    return found.pop()


def ghz_state(layout: Sequence[tuple[int, str]], sign: int = 1) -> PureState:
    """(|↑...↑> + sign |↓...↓>)/sqrt(2) with electron ``e`` in mode ``m`` for each ``(e, m)``."""
    ups = configuration((e, m, UP) for e, m in layout)
    downs = configuration((e, m, DOWN) for e, m in layout)
    return PureState.from_terms({ups: 1.0, downs: float(sign)})


def layout_of(s: PureState) -> list[tuple[int, str]]:
    """Electron -> mode layout, which must agree across every term."""
    layouts = {tuple((slot.electron, slot.mode) for slot in config) for config in s.terms}
    if len(layouts) != 1:
        raise StateError("electrons occupy different modes across terms")
    return list(layouts.pop())
