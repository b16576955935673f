"""Parameter vectors, designs, and the full design problem bundle."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .correlation import CorrelationSpec
from .errors import DimensionMismatch
from .families import Family
from .sequences import Sequence, param_dimension

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ParamVector:
    """Model parameters under the baseline-constrained coding.

    ``period`` holds the effects of periods 2..p, ``direct`` the direct
    effects of treatments 2..t and ``carryover`` their carryover
    effects; the period-1 / treatment-1 baselines are identically zero
    and never stored.
    """

    intercept: float
    period: tuple[float, ...]
    direct: tuple[float, ...]
    carryover: tuple[float, ...]

    def __post_init__(self):
        if len(self.direct) != len(self.carryover):
            raise DimensionMismatch(
                "direct and carryover blocks must have the same length (t - 1)"
            )

    @property
    def n_periods(self) -> int:
        return len(self.period) + 1

    @property
    def n_treatments(self) -> int:
        return len(self.direct) + 1

    @property
    def dimension(self) -> int:
        return 1 + len(self.period) + len(self.direct) + len(self.carryover)

    def to_array(self) -> np.ndarray:
        return np.array(
            (self.intercept, *self.period, *self.direct, *self.carryover), dtype=float
        )

    @classmethod
    def from_array(cls, values, p: int, t: int) -> "ParamVector":
        values = [float(v) for v in np.asarray(values, dtype=float).ravel()]
        expected = param_dimension(p, t)
        if len(values) != expected:
            raise DimensionMismatch(
                f"theta has {len(values)} entries, expected {expected} for p={p}, t={t}"
            )
        return cls(
            intercept=values[0],
            period=tuple(values[1:p]),
            direct=tuple(values[p : p + t - 1]),
            carryover=tuple(values[p + t - 1 :]),
        )


@dataclass(frozen=True)
class Design:
    """A weight vector on the simplex over the problem's sequence set."""

    sequences: tuple[Sequence, ...]
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != len(self.sequences):
            raise DimensionMismatch("one weight per sequence required")
        if np.any(w < 0):
            raise DimensionMismatch("design weights must be nonnegative")
        if abs(float(w.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise DimensionMismatch(f"design weights sum to {w.sum()!r}, not 1")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, sequences) -> "Design":
        seqs = tuple(sequences)
        return cls(seqs, np.full(len(seqs), 1.0 / len(seqs)))

    @classmethod
    def from_pairs(cls, pairs, t: int) -> "Design":
        from .sequences import parse_sequence

        seqs = tuple(parse_sequence(lbl, t) for lbl, _ in pairs)
        return cls(seqs, np.array([w for _, w in pairs], dtype=float))

    def weight_of(self, seq: Sequence) -> float:
        return float(self.weights[self.sequences.index(seq)])

    def as_pairs(self) -> list[tuple[str, float]]:
        return [(s.label, float(w)) for s, w in zip(self.sequences, self.weights)]


@dataclass(frozen=True)
class DesignProblem:
    """Everything needed to evaluate designs for one crossover trial.

    ``true_correlation`` switches variance evaluation to the sandwich
    form: the working structure drives the weighting while the true
    structure drives Cov(Y). When it is None the working structure is
    taken as the truth and the variance is the plain inverse
    information.
    """

    n_treatments: int
    n_periods: int
    sequences: tuple[Sequence, ...]
    family: Family
    theta: ParamVector
    working_correlation: CorrelationSpec
    true_correlation: CorrelationSpec | None = None

    def __post_init__(self):
        t, p = self.n_treatments, self.n_periods
        if t < 2 or p < 2:
            raise DimensionMismatch("need at least 2 treatments and 2 periods")
        if not self.sequences:
            raise DimensionMismatch("sequence set is empty")
        object.__setattr__(self, "sequences", tuple(self.sequences))
        seen = set()
        for seq in self.sequences:
            if len(seq) != p:
                raise DimensionMismatch(
                    f"sequence {seq.label} has {len(seq)} periods, expected {p}"
                )
            if max(seq.treatments) > t:
                raise DimensionMismatch(
                    f"sequence {seq.label} uses a treatment beyond the {t} declared"
                )
            if seq in seen:
                raise DimensionMismatch(f"duplicate sequence {seq.label} in design space")
            seen.add(seq)
        if self.theta.n_periods != p or self.theta.n_treatments != t:
            raise DimensionMismatch(
                f"theta is sized for p={self.theta.n_periods}, t={self.theta.n_treatments}; "
                f"problem has p={p}, t={t}"
            )

    @property
    def param_dimension(self) -> int:
        return param_dimension(self.n_periods, self.n_treatments)

    @property
    def uses_sandwich(self) -> bool:
        return self.true_correlation is not None

    def with_theta(self, theta: ParamVector) -> "DesignProblem":
        return dataclasses.replace(self, theta=theta)

    def with_correlation(
        self,
        working: CorrelationSpec | None = None,
        true: CorrelationSpec | None | str = "keep",
    ) -> "DesignProblem":
        changes = {}
        if working is not None:
            changes["working_correlation"] = working
        if true != "keep":
            changes["true_correlation"] = true
        return dataclasses.replace(self, **changes)
