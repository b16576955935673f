"""Treatment sequences and per-sequence model matrices.

A sequence is the ordered list of treatments one subject receives, one
treatment per period, written as an uppercase letter string ("ABBA")
with A denoting treatment 1. Model matrices use the baseline-constrained
coding (period-1, treatment-1 and carryover-1 effects fixed at zero), so
a problem with t treatments and p periods has

    m = p + 2t - 2

free parameters, laid out as

    intercept | period 2..p | direct 2..t | carryover 2..t.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, UnknownTreatmentLabel

_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def param_dimension(p: int, t: int) -> int:
    """Number of free parameters under the baseline-constrained coding."""
    return p + 2 * t - 2


@dataclass(frozen=True)
class Sequence:
    """One subject's treatment order, stored as 1-based treatment indices."""

    treatments: tuple[int, ...]

    def __post_init__(self):
        if not self.treatments:
            raise DimensionMismatch("a sequence needs at least one period")
        for s in self.treatments:
            if not 1 <= s <= len(_ALPHABET):
                raise UnknownTreatmentLabel(f"treatment index {s} out of range")

    def __len__(self) -> int:
        return len(self.treatments)

    @property
    def label(self) -> str:
        return "".join(_ALPHABET[s - 1] for s in self.treatments)

    def __str__(self) -> str:
        return self.label


def parse_sequence(text: str, t: int) -> Sequence:
    """Parse a letter string like ``"BDAC"`` into a :class:`Sequence`.

    Letters map positionally (A -> 1, B -> 2, ...); only the first ``t``
    uppercase letters are legal.
    """
    if not text:
        raise UnknownTreatmentLabel("empty sequence string")
    treatments = []
    for ch in text:
        idx = _ALPHABET.find(ch) + 1
        if idx == 0 or idx > t:
            raise UnknownTreatmentLabel(
                f"treatment {ch!r} is not one of the first {t} uppercase letters"
            )
        treatments.append(idx)
    return Sequence(tuple(treatments))


def parse_sequences(labels: list[str] | tuple[str, ...], t: int) -> tuple[Sequence, ...]:
    """Parse several labels at once, preserving order."""
    return tuple(parse_sequence(lbl, t) for lbl in labels)


def enumerate_permutation_sequences(t: int) -> list[Sequence]:
    """All t! sequences using each of the t treatments exactly once.

    Returned in lexicographic label order (ABC.. first, reversed last).
    Only meaningful when the number of periods equals ``t``.
    """
    return [Sequence(perm) for perm in itertools.permutations(range(1, t + 1))]


def build_design_matrix(seq: Sequence, p: int, t: int) -> np.ndarray:
    """p x m model matrix for one sequence under the constrained coding.

    Column blocks: an all-ones intercept column; period indicators for
    periods 2..p; direct-treatment indicators for treatments 2..t; and
    carryover indicators for treatments 2..t. Period 1 has no carryover
    (there is no pre-trial treatment), so the first row of the carryover
    block is identically zero.
    """
    if len(seq) != p:
        raise DimensionMismatch(
            f"sequence {seq.label} has {len(seq)} periods, expected {p}"
        )
    if max(seq.treatments) > t:
        raise UnknownTreatmentLabel(
            f"sequence {seq.label} uses a treatment beyond the {t} declared"
        )
    m = param_dimension(p, t)
    x = np.zeros((p, m))
    x[:, 0] = 1.0
    for i in range(1, p):
        x[i, i] = 1.0
    for i, s in enumerate(seq.treatments):
        if s >= 2:
            x[i, p + s - 2] = 1.0
    for i in range(1, p):
        prev = seq.treatments[i - 1]
        if prev >= 2:
            x[i, p + t - 1 + prev - 2] = 1.0
    return x


def build_full_indicator_matrix(seq: Sequence, p: int, t: int) -> np.ndarray:
    """Unconstrained p x (1 + p + 2t) indicator matrix (debug dumps only).

    Includes the baseline period-1, treatment-1 and carryover-1 columns
    that the constrained coding drops; rank-deficient by construction and
    never used for estimation.
    """
    if len(seq) != p:
        raise DimensionMismatch(
            f"sequence {seq.label} has {len(seq)} periods, expected {p}"
        )
    x = np.zeros((p, 1 + p + 2 * t))
    x[:, 0] = 1.0
    for i in range(p):
        x[i, 1 + i] = 1.0
        x[i, 1 + p + seq.treatments[i] - 1] = 1.0
        if i >= 1:
            x[i, 1 + p + t + seq.treatments[i - 1] - 1] = 1.0
    return x


def tau_selector(p: int, t: int) -> np.ndarray:
    """(t-1) x m selector extracting the direct-effect block of theta."""
    if p < 2 or t < 2:
        raise DimensionMismatch("need at least 2 periods and 2 treatments")
    h = np.zeros((t - 1, param_dimension(p, t)))
    for j in range(t - 1):
        h[j, p + j] = 1.0
    return h
