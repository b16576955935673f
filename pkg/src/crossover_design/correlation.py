"""Working correlation structures for within-subject responses.

Seven kinds are supported. Three are sequence-free:

* ``compound_symmetric`` -- constant correlation ``rho`` everywhere,
* ``ar1``                -- ``rho ** |i - i'|``,
* ``banded1``            -- ``rho`` at lag 1, zero beyond,

three depend on which treatments the subject received, through a table
of per-treatment-pair correlations:

* ``seq_banded``         -- lag-1 band with entry ``rho[s, s']`` for the
                            treatments given in adjacent periods,
* ``seq_ar1_symmetric``  -- AR(1)-type decay with a symmetric pair table,
* ``seq_ar1``            -- AR(1)-type decay with an ordered pair table,

and ``custom`` carries an explicit matrix per sequence. For the two
AR(1)-type sequence-dependent kinds the entry at periods (i, i') is

    rho[s_min, s_max] ** |i - i'|

where s_min/s_max are the treatments at the earlier/later of the two
periods. Every built matrix is symmetrized and validated positive
definite before use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import (
    DimensionMismatch,
    MissingPairCorrelation,
    NotPositiveDefinite,
)
from .sequences import Sequence, parse_sequence

FIXED_KINDS = ("compound_symmetric", "ar1", "banded1")
SEQUENCE_KINDS = ("seq_banded", "seq_ar1_symmetric", "seq_ar1")
ALL_KINDS = FIXED_KINDS + SEQUENCE_KINDS + ("custom",)

# Structure numbering used by the reference tables and the CLI --structure flag.
KIND_BY_NUMBER = {
    1: "compound_symmetric",
    2: "ar1",
    3: "banded1",
    4: "seq_banded",
    5: "seq_ar1_symmetric",
    6: "seq_ar1",
}
NUMBER_BY_KIND = {v: k for k, v in KIND_BY_NUMBER.items()}

MIN_EIGENVALUE = 1e-10

PairTable = Mapping[tuple[int, int], float]


def _check_rho(value: float, what: str) -> float:
    value = float(value)
    if not -1.0 < value < 1.0:
        raise NotPositiveDefinite(f"{what} must lie in (-1, 1), got {value}")
    return value


@dataclass(frozen=True)
class CorrelationSpec:
    """Tagged union selecting one correlation kind with its parameters."""

    kind: str
    rho: float | None = None
    rho_table: PairTable | None = None
    matrices: Mapping[str, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise DimensionMismatch(f"unknown correlation kind {self.kind!r}")
        if self.kind in FIXED_KINDS:
            if self.rho is None:
                raise MissingPairCorrelation(f"{self.kind} needs a rho value")
            _check_rho(self.rho, "rho")
        elif self.kind in SEQUENCE_KINDS:
            if not self.rho_table:
                raise MissingPairCorrelation(f"{self.kind} needs a rho table")
            table = {}
            for (a, b), r in self.rho_table.items():
                _check_rho(r, f"rho[{a},{b}]")
                table[(int(a), int(b))] = float(r)
            if self.kind == "seq_ar1_symmetric":
                for (a, b), r in list(table.items()):
                    mirror = table.get((b, a))
                    if mirror is not None and abs(mirror - r) > 0:
                        raise MissingPairCorrelation(
                            f"symmetric table has rho[{a},{b}]={r} != rho[{b},{a}]={mirror}"
                        )
                    table[(b, a)] = r
            object.__setattr__(self, "rho_table", MappingProxyType(table))
        else:
            if not self.matrices:
                raise MissingPairCorrelation("custom kind needs per-sequence matrices")
            frozen = {}
            for label, mat in self.matrices.items():
                arr = np.asarray(mat, dtype=float)
                if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                    raise DimensionMismatch(f"custom matrix for {label} is not square")
                if np.max(np.abs(arr - arr.T)) > 1e-12:
                    raise NotPositiveDefinite(f"custom matrix for {label} is not symmetric")
                if np.max(np.abs(np.diag(arr) - 1.0)) > 1e-12:
                    raise NotPositiveDefinite(f"custom matrix for {label} lacks unit diagonal")
                arr.setflags(write=False)
                frozen[label] = arr
            object.__setattr__(self, "matrices", MappingProxyType(frozen))

    # -- constructors ------------------------------------------------

    @classmethod
    def compound_symmetric(cls, rho: float) -> "CorrelationSpec":
        return cls("compound_symmetric", rho=rho)

    @classmethod
    def ar1(cls, rho: float) -> "CorrelationSpec":
        return cls("ar1", rho=rho)

    @classmethod
    def banded1(cls, rho: float) -> "CorrelationSpec":
        return cls("banded1", rho=rho)

    @classmethod
    def seq_banded(cls, rho_table: PairTable) -> "CorrelationSpec":
        return cls("seq_banded", rho_table=rho_table)

    @classmethod
    def seq_ar1_symmetric(cls, rho_table: PairTable) -> "CorrelationSpec":
        return cls("seq_ar1_symmetric", rho_table=rho_table)

    @classmethod
    def seq_ar1(cls, rho_table: PairTable) -> "CorrelationSpec":
        return cls("seq_ar1", rho_table=rho_table)

    @classmethod
    def custom(cls, matrices: Mapping[str, np.ndarray]) -> "CorrelationSpec":
        return cls("custom", matrices=matrices)

    @property
    def is_sequence_dependent(self) -> bool:
        return self.kind in SEQUENCE_KINDS or self.kind == "custom"

    def lookup_pair(self, a: int, b: int) -> float:
        """Pair correlation for treatments (a, b), a given in the earlier period."""
        assert self.rho_table is not None
        if self.kind == "seq_ar1_symmetric":
            a, b = min(a, b), max(a, b)
        try:
            return self.rho_table[(a, b)]
        except KeyError:
            raise MissingPairCorrelation(
                f"no correlation for treatment pair ({a}, {b}) in {self.kind} table"
            ) from None


def _validate(c: np.ndarray, context: str) -> np.ndarray:
    c = 0.5 * (c + c.T)
    if np.max(np.abs(np.diag(c) - 1.0)) > 1e-12:
        raise NotPositiveDefinite(f"{context}: diagonal is not 1")
    smallest = float(np.linalg.eigvalsh(c)[0])
    if smallest <= MIN_EIGENVALUE:
        raise NotPositiveDefinite(
            f"{context}: smallest eigenvalue {smallest:.3e} <= {MIN_EIGENVALUE:.0e}"
        )
    c.setflags(write=False)
    return c


def build_correlation(spec: CorrelationSpec, seq: Sequence, p: int) -> np.ndarray:
    """Build and validate the p x p correlation matrix for one sequence."""
    if len(seq) != p:
        raise DimensionMismatch(
            f"sequence {seq.label} has {len(seq)} periods, expected {p}"
        )
    lag = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    if spec.kind == "compound_symmetric":
        c = np.full((p, p), spec.rho, dtype=float)
        np.fill_diagonal(c, 1.0)
    elif spec.kind == "ar1":
        c = np.asarray(spec.rho, dtype=float) ** lag
    elif spec.kind == "banded1":
        c = np.where(lag == 1, spec.rho, 0.0) + np.eye(p)
    elif spec.kind == "seq_banded":
        c = np.eye(p)
        for i in range(p - 1):
            r = spec.lookup_pair(seq.treatments[i], seq.treatments[i + 1])
            c[i, i + 1] = c[i + 1, i] = r
    elif spec.kind in ("seq_ar1_symmetric", "seq_ar1"):
        c = np.eye(p)
        for i in range(p):
            for j in range(i + 1, p):
                r = spec.lookup_pair(seq.treatments[i], seq.treatments[j])
                c[i, j] = c[j, i] = r ** (j - i)
    else:
        assert spec.matrices is not None
        try:
            c = np.array(spec.matrices[seq.label], dtype=float)
        except KeyError:
            raise MissingPairCorrelation(
                f"no custom correlation matrix supplied for sequence {seq.label}"
            ) from None
        if c.shape != (p, p):
            raise DimensionMismatch(
                f"custom matrix for {seq.label} has shape {c.shape}, expected {(p, p)}"
            )
    return _validate(c, f"correlation {spec.kind} for sequence {seq.label}")


# -- reference parameter choices ------------------------------------------

# Same-treatment correlation shared by both treatments in the two-treatment
# AR(1)-type structures (their cross-treatment values are set separately).
TWO_TREATMENT_SAME_RHO = 0.1


def _latin_square_ordered() -> dict[tuple[int, int], float]:
    by_first = {1: 0.4, 2: 0.3, 3: 0.2, 4: 0.1}
    return {
        (a, b): by_first[a] for a in range(1, 5) for b in range(1, 5) if a != b
    }


def _latin_square_symmetric() -> dict[tuple[int, int], float]:
    table = {}
    for a in range(1, 5):
        for b in range(a + 1, 5):
            if a == 1:
                table[(a, b)] = 0.4
            elif a == 2:
                table[(a, b)] = 0.3
            else:
                table[(a, b)] = 0.2
    return table


def default_rho_tables(scenario: str) -> dict[int, CorrelationSpec]:
    """Reference parameter choices for the six structures, by number.

    ``scenario`` is ``"two_treatment"`` (A/B trials) or
    ``"latin_square_4"`` (four treatments, four periods). These are the
    values used by the bundled example problems and the misspecification
    table.
    """
    if scenario == "two_treatment":
        same = TWO_TREATMENT_SAME_RHO
        return {
            1: CorrelationSpec.compound_symmetric(0.1),
            2: CorrelationSpec.ar1(0.1),
            3: CorrelationSpec.banded1(0.1),
            4: CorrelationSpec.seq_banded(
                {(1, 2): 0.2, (2, 1): 0.5, (1, 1): 0.1, (2, 2): 0.3}
            ),
            5: CorrelationSpec.seq_ar1_symmetric(
                {(1, 2): 0.4, (1, 1): same, (2, 2): same}
            ),
            6: CorrelationSpec.seq_ar1(
                {(1, 2): 0.4, (2, 1): 0.3, (1, 1): same, (2, 2): same}
            ),
        }
    if scenario == "latin_square_4":
        return {
            1: CorrelationSpec.compound_symmetric(0.3),
            2: CorrelationSpec.ar1(0.2),
            3: CorrelationSpec.banded1(0.1),
            4: CorrelationSpec.seq_banded(_latin_square_ordered()),
            5: CorrelationSpec.seq_ar1_symmetric(_latin_square_symmetric()),
            6: CorrelationSpec.seq_ar1(_latin_square_ordered()),
        }
    raise DimensionMismatch(
        f"unknown scenario {scenario!r}; use 'two_treatment' or 'latin_square_4'"
    )


def spec_from_config(
    kind: str,
    rho: float | None = None,
    rho_table: Mapping[str, float] | None = None,
    custom: Mapping[str, object] | None = None,
    t: int | None = None,
) -> CorrelationSpec:
    """Build a spec from config-file primitives (letter-pair keys)."""
    if kind in FIXED_KINDS:
        if rho is None:
            raise MissingPairCorrelation(f"{kind} needs 'rho'")
        return CorrelationSpec(kind, rho=rho)
    if kind in SEQUENCE_KINDS:
        if not rho_table:
            raise MissingPairCorrelation(f"{kind} needs 'rho_table'")
        n_treat = t if t is not None else 26
        table = {}
        for key, value in rho_table.items():
            pair = parse_sequence(key, n_treat)
            if len(pair) != 2:
                raise DimensionMismatch(f"rho_table key {key!r} must name two treatments")
            table[(pair.treatments[0], pair.treatments[1])] = float(value)
        return CorrelationSpec(kind, rho_table=table)
    if kind == "custom":
        if not custom:
            raise MissingPairCorrelation("custom kind needs 'custom' matrices")
        return CorrelationSpec.custom({k: np.asarray(v, dtype=float) for k, v in custom.items()})
    raise DimensionMismatch(f"unknown correlation kind {kind!r}")
