"""Named example problems used by the CLI, the service, and the tests.

Each fixture bundles a sequence set, a response family, and a nominal
parameter vector from the bundled crossover examples; the correlation
structure is chosen separately by number (1..6, see the correlation
module) with scenario-appropriate default parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

from .correlation import CorrelationSpec, default_rho_tables
from .errors import ConfigError
from .families import Family
from .problem import DesignProblem, ParamVector
from .sequences import enumerate_permutation_sequences, parse_sequences

# nominal parameter vectors: *_nonuniform give clearly non-uniform optima,
# *_uniform give near-uniform optima
THETA_P2_NONUNIFORM = (0.5, -1.0, 4.0, -2.0)
THETA_P2_UNIFORM = (0.5, 0.06, -0.35, 0.73)
THETA_P3_NONUNIFORM = (0.5, -1.0, 2.0, 4.0, -2.0)
THETA_P3_UNIFORM = (0.5, 0.06, -0.53, -0.35, 0.73)
THETA_P4_NONUNIFORM = (0.5, -1.0, 2.0, -1.5, 4.0, -2.0)
THETA_P4_UNIFORM = (0.5, 0.06, -0.53, -0.6, -0.35, 0.73)
THETA_POISSON_NONUNIFORM = (0.2, 0.34, -1.60, -1.65)
THETA_POISSON_UNIFORM = (-0.223, -0.875, 0.405, -0.105)
THETA_LATIN_NONUNIFORM = (-2.0, 0.25, 0.0, 0.75, 1.0, 5.0, -1.5, -3.5, 2.75, 0.75)
THETA_LATIN_UNIFORM = (0.5, 0.06, -0.53, -0.6, -0.35, 0.025, -0.23, 0.73, 0.23, 0.30)

LATIN_SQUARE_LABELS = ("ABCD", "BDAC", "CADB", "DCBA")


@dataclass(frozen=True)
class FixtureSpec:
    name: str
    description: str
    t: int
    p: int
    sequence_labels: tuple[str, ...]
    family: Family
    theta: tuple[float, ...]
    scenario: str
    default_structure: int = 1


def _two_treatment(name, desc, labels, theta, p, family=Family.BINARY):
    return FixtureSpec(
        name=name,
        description=desc,
        t=2,
        p=p,
        sequence_labels=tuple(labels),
        family=family,
        theta=tuple(theta),
        scenario="two_treatment",
    )


_FIXTURES: dict[str, FixtureSpec] = {}
for spec in [
    _two_treatment("table1-theta1", "two periods, AB/BA, non-uniform optimum",
                   ("AB", "BA"), THETA_P2_NONUNIFORM, 2),
    _two_treatment("table1-theta2", "two periods, AB/BA, near-uniform optimum",
                   ("AB", "BA"), THETA_P2_UNIFORM, 2),
    _two_treatment("table1-four-seq-theta1", "two periods, four sequences",
                   ("AB", "BA", "AA", "BB"), THETA_P2_NONUNIFORM, 2),
    _two_treatment("table1-four-seq-theta2", "two periods, four sequences",
                   ("AB", "BA", "AA", "BB"), THETA_P2_UNIFORM, 2),
    _two_treatment("table2-abb-baa-theta1", "three periods, ABB/BAA",
                   ("ABB", "BAA"), THETA_P3_NONUNIFORM, 3),
    _two_treatment("table2-abb-baa-theta2", "three periods, ABB/BAA",
                   ("ABB", "BAA"), THETA_P3_UNIFORM, 3),
    _two_treatment("table2-aba-bab-theta1", "three periods, ABA/BAB",
                   ("ABA", "BAB"), THETA_P3_NONUNIFORM, 3),
    _two_treatment("table2-aba-bab-theta2", "three periods, ABA/BAB",
                   ("ABA", "BAB"), THETA_P3_UNIFORM, 3),
    _two_treatment("table2-aab-bba-theta1", "three periods, AAB/BBA",
                   ("AAB", "BBA"), THETA_P3_NONUNIFORM, 3),
    _two_treatment("table3-boundary-theta1", "three periods, four sequences, boundary optimum",
                   ("ABB", "BAA", "AAA", "BBB"), THETA_P3_NONUNIFORM, 3),
    _two_treatment("table3-boundary-theta2", "three periods, four sequences, boundary optimum",
                   ("ABB", "BAA", "AAA", "BBB"), THETA_P3_UNIFORM, 3),
    _two_treatment("table4-aabb-bbaa-theta1", "four periods, AABB/BBAA",
                   ("AABB", "BBAA"), THETA_P4_NONUNIFORM, 4),
    _two_treatment("table4-aabb-bbaa-theta2", "four periods, AABB/BBAA",
                   ("AABB", "BBAA"), THETA_P4_UNIFORM, 4),
    _two_treatment("table4-abba-baab-theta1", "four periods, ABBA/BAAB",
                   ("ABBA", "BAAB"), THETA_P4_NONUNIFORM, 4),
    _two_treatment("table4-abab-baba-theta1", "four periods, ABAB/BABA",
                   ("ABAB", "BABA"), THETA_P4_NONUNIFORM, 4),
    _two_treatment("poisson-theta1", "anti-nausea count model, non-uniform nominal values",
                   ("AB", "BA"), THETA_POISSON_NONUNIFORM, 2, Family.POISSON),
    _two_treatment("poisson-theta2", "anti-nausea count model, data-based nominal values",
                   ("AB", "BA"), THETA_POISSON_UNIFORM, 2, Family.POISSON),
]:
    _FIXTURES[spec.name] = spec

_FIXTURES["latin-square-theta1"] = FixtureSpec(
    name="latin-square-theta1",
    description="four-treatment Latin square, non-uniform optimum",
    t=4, p=4,
    sequence_labels=LATIN_SQUARE_LABELS,
    family=Family.BINARY,
    theta=THETA_LATIN_NONUNIFORM,
    scenario="latin_square_4",
)
_FIXTURES["latin-square-theta2"] = FixtureSpec(
    name="latin-square-theta2",
    description="four-treatment Latin square, near-uniform optimum",
    t=4, p=4,
    sequence_labels=LATIN_SQUARE_LABELS,
    family=Family.BINARY,
    theta=THETA_LATIN_UNIFORM,
    scenario="latin_square_4",
)
for which, theta in (("theta1", THETA_LATIN_NONUNIFORM), ("theta2", THETA_LATIN_UNIFORM)):
    _FIXTURES[f"latin-square-24seq-{which}"] = FixtureSpec(
        name=f"latin-square-24seq-{which}",
        description="all 24 orderings of four treatments",
        t=4, p=4,
        sequence_labels=tuple(s.label for s in enumerate_permutation_sequences(4)),
        family=Family.BINARY,
        theta=tuple(theta),
        scenario="latin_square_4",
        default_structure=2,
    )


def fixture_names() -> list[str]:
    return sorted(_FIXTURES)


def get_fixture(name: str) -> FixtureSpec:
    try:
        return _FIXTURES[name]
    except KeyError:
        raise ConfigError("fixture", f"unknown fixture {name!r}; see `fixtures` command") from None


def fixture_problem(
    name: str,
    structure: int | None = None,
    rho: float | None = None,
    true_structure: int | None = None,
) -> DesignProblem:
    """Build the named problem with a numbered correlation structure.

    ``rho`` overrides the scalar parameter of the fixed-kind structures
    (1..3); sequence-dependent kinds always use the scenario defaults.
    ``true_structure`` adds a differing truth for sandwich evaluation.
    """
    spec = get_fixture(name)
    tables = default_rho_tables(spec.scenario)
    number = structure if structure is not None else spec.default_structure
    if number not in tables:
        raise ConfigError("structure", f"structure must be 1..6, got {number}")
    corr = tables[number]
    if rho is not None:
        if corr.kind not in ("compound_symmetric", "ar1", "banded1"):
            raise ConfigError("rho", f"structure {number} does not take a scalar rho")
        corr = CorrelationSpec(corr.kind, rho=rho)
    true_corr = None
    if true_structure is not None:
        if true_structure not in tables:
            raise ConfigError("true_structure", f"structure must be 1..6, got {true_structure}")
        true_corr = tables[true_structure]
    return DesignProblem(
        n_treatments=spec.t,
        n_periods=spec.p,
        sequences=parse_sequences(spec.sequence_labels, spec.t),
        family=spec.family,
        theta=ParamVector.from_array(spec.theta, spec.p, spec.t),
        working_correlation=corr,
        true_correlation=true_corr,
    )
