"""Acceptance gate: every reference-table criterion at its stated tolerance.

Each test prints one PASS/FAIL line (collected into the terminal
summary) and then asserts. Three checks encode reference values that
the implemented equations cannot produce; the independent oracles in
this suite pin what the equations do produce, and those checks fail
with a message saying so rather than being loosened.
"""

import json
import time

import numpy as np
from click.testing import CliRunner

from crossover_design import (
    CorrelationSpec,
    Design,
    DesignProblem,
    Family,
    OptimizerConfig,
    ParamVector,
    TwoStageConfig,
    assemble,
    grid_oracle_2seq,
    misspec_table,
    objective,
    optimize,
    parse_sequences,
    two_stage_run,
    variance_report,
)
from crossover_design.cli import main as cli_main
from crossover_design.correlation import default_rho_tables
from crossover_design.gee import log_det_objective

from conftest import (
    ACCEPTANCE_RESULTS,
    PROPERTY_FIXTURES,
    TWO_SEQUENCE_FIXTURES,
    make_problem,
    random_interior_weights,
)

CFG = OptimizerConfig(restarts=4, seed=20260808)


def _check(number: int, description: str, ok: bool, detail: str = ""):
    ACCEPTANCE_RESULTS.append((number, description, bool(ok), detail))
    print(f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {description}"
          + (f" ({detail})" if detail and not ok else ""))
    assert ok, f"criterion {number}: {description}: {detail}"


def _weights(name, structure, cfg=CFG, rho=None):
    res = optimize(make_problem(name, structure=structure, rho=rho), cfg)
    return np.asarray(res.design.weights)


def test_criterion_01_two_period_proportions_all_structures():
    failures = []
    for structure in range(1, 7):
        w1 = _weights("table1-theta1", structure)[0]
        if abs(w1 - 0.1770) > 2e-3:
            failures.append(f"structure {structure} theta1: {w1:.4f}")
        w2 = _weights("table1-theta2", structure)[0]
        if abs(w2 - 0.5070) > 2e-3:
            failures.append(f"structure {structure} theta2: {w2:.4f}")
    _check(1, "AB/BA proportions 0.1770 and 0.5070 across six structures (12 runs)",
           not failures, "; ".join(failures))


def test_criterion_02_four_sequence_rows():
    failures = []
    for structure, expected in [(1, [0.0908, 0.5207, 0.0315, 0.3570]),
                                (4, [0.0957, 0.4960, 0.0338, 0.3745])]:
        w = _weights("table1-four-seq-theta1", structure)
        dev = float(np.max(np.abs(w - expected)))
        if dev > 5e-3:
            failures.append(f"structure {structure}: dev {dev:.4f}")
    _check(2, "AB/BA/AA/BB proportions under structures 1 and 4",
           not failures, "; ".join(failures))


def test_criterion_03_three_period_rows():
    failures = []
    for name, expected in [("table2-abb-baa-theta1", [0.5756, 0.4244]),
                           ("table2-aba-bab-theta1", [0.1768, 0.8232])]:
        w = _weights(name, 1)
        dev = float(np.max(np.abs(w - expected)))
        if dev > 5e-3:
            failures.append(f"{name}: dev {dev:.4f}")
    _check(3, "three-period ABB/BAA and ABA/BAB proportions",
           not failures, "; ".join(failures))


def test_criterion_04_boundary_solution():
    w = _weights("table3-boundary-theta2", 1)
    dev = float(np.max(np.abs(w - [0.4880, 0.5120, 0.0, 0.0])))
    ok = dev <= 5e-3 and w[2] == 0.0 and w[3] == 0.0
    _check(4, "boundary optimum with clipped-exact zeros on AAA and BBB",
           ok, f"weights {np.round(w, 4)}")


def test_criterion_05_four_period_rows():
    failures = []
    for name, structure, expected in [
        ("table4-aabb-bbaa-theta1", 1, [0.2723, 0.7277]),
        ("table4-abba-baab-theta1", 5, [0.6444, 0.3556]),
    ]:
        w = _weights(name, structure)
        dev = float(np.max(np.abs(w - expected)))
        if dev > 5e-3:
            failures.append(f"{name} structure {structure}: dev {dev:.4f}")
    _check(5, "four-period AABB/BBAA and ABBA/BAAB proportions",
           not failures, "; ".join(failures))


def test_criterion_06_poisson_rows():
    failures = []
    for name, expected in [("poisson-theta1", 0.3632), ("poisson-theta2", 0.5505)]:
        for structure in range(1, 7):
            pr = make_problem(name, structure=structure)
            w = optimize(pr, CFG).design.weights[0]
            if abs(w - expected) > 2e-3:
                oracle = grid_oracle_2seq(pr, step=1e-4).weights[0]
                failures.append(
                    f"{name} structure {structure}: weight {w:.4f} vs reference "
                    f"{expected:.4f}; grid oracle confirms the objective minimum "
                    f"is at {oracle:.4f}"
                )
    _check(6, "count-response proportions 0.3632 and 0.5505 across six structures",
           not failures, "; ".join(failures[:2]))


def test_criterion_07_latin_square_rows():
    failures = []
    w1 = _weights("latin-square-theta1", 2)
    if float(np.max(np.abs(w1 - [0.1747, 0.2490, 0.2184, 0.3579]))) > 5e-3:
        failures.append(f"theta1 structure 2: {np.round(w1, 4)}")
    w2 = _weights("latin-square-theta2", 1)
    if float(np.max(np.abs(w2 - [0.2463, 0.2493, 0.2504, 0.2540]))) > 5e-3:
        failures.append(f"theta2 structure 1: {np.round(w2, 4)}")
    _check(7, "Latin-square proportions under both nominal parameter sets",
           not failures, "; ".join(failures))


# reference misspecification table: (true, working) -> weights under both
# nominal sets and the efficiency floors; two rows are printed shifted in
# the source and are restored by their row sums
MISSPEC_REFERENCE = {
    (1, 2): ([0.1723, 0.2483, 0.2222, 0.3572], [0.2463, 0.2493, 0.2504, 0.2540]),
    (1, 3): ([0.1726, 0.2483, 0.2223, 0.3568], [0.2463, 0.2493, 0.2504, 0.2540]),
    (1, 4): ([0.1723, 0.2513, 0.2202, 0.3562], [0.2500, 0.2500, 0.2500, 0.2500]),
    (1, 5): ([0.1713, 0.2495, 0.2223, 0.3569], [0.2447, 0.2475, 0.2557, 0.2521]),
    (1, 6): ([0.1724, 0.2508, 0.2197, 0.3571], [0.2500, 0.2500, 0.2500, 0.2500]),
    (2, 1): ([0.1745, 0.2489, 0.2183, 0.3583], [0.2462, 0.2493, 0.2500, 0.2545]),
    (2, 3): ([0.1744, 0.2489, 0.2182, 0.3585], [0.2462, 0.2493, 0.2500, 0.2545]),
    (2, 4): ([0.1745, 0.2514, 0.2177, 0.3564], [0.2500, 0.2500, 0.2500, 0.2500]),
    (2, 5): ([0.1740, 0.2503, 0.2180, 0.3577], [0.2450, 0.2480, 0.2530, 0.2540]),
    (2, 6): ([0.1744, 0.2512, 0.2174, 0.3570], [0.2463, 0.2497, 0.2505, 0.2535]),
    (3, 1): ([0.1714, 0.2480, 0.2236, 0.3570], [0.2461, 0.2492, 0.2507, 0.2540]),
    (3, 2): ([0.1711, 0.2480, 0.2235, 0.3574], [0.2462, 0.2492, 0.2506, 0.2540]),
    (3, 4): ([0.1713, 0.2516, 0.2209, 0.3562], [0.2500, 0.2500, 0.2500, 0.2500]),
    (3, 5): ([0.1700, 0.2463, 0.2235, 0.3572], [0.2441, 0.2476, 0.2561, 0.2522]),
    (3, 6): ([0.1713, 0.2510, 0.2204, 0.3573], [0.2500, 0.2500, 0.2500, 0.2500]),
    (4, 1): ([0.1783, 0.2585, 0.2140, 0.3492], [0.2500, 0.2637, 0.2347, 0.2516]),
    (4, 2): ([0.1784, 0.2580, 0.2156, 0.3480], [0.2486, 0.2640, 0.2344, 0.2530]),
    (4, 3): ([0.1782, 0.2592, 0.2131, 0.3495], [0.2498, 0.2643, 0.2342, 0.2517]),
    (4, 5): ([0.1778, 0.2579, 0.2167, 0.3476], [0.2470, 0.2650, 0.2343, 0.2537]),
    (4, 6): ([0.1790, 0.2555, 0.2165, 0.3490], [0.2485, 0.2631, 0.2337, 0.2547]),
    (5, 1): ([0.1774, 0.2477, 0.2092, 0.3657], [0.2466, 0.2501, 0.2486, 0.2547]),
    (5, 2): ([0.1776, 0.2476, 0.2099, 0.3649], [0.2470, 0.2506, 0.2470, 0.2554]),
    (5, 3): ([0.1770, 0.2477, 0.2087, 0.3666], [0.2462, 0.2503, 0.2485, 0.2550]),
    (5, 4): ([0.1776, 0.2492, 0.2108, 0.3624], [0.2472, 0.2538, 0.2450, 0.2540]),
    (5, 6): ([0.1774, 0.2496, 0.2110, 0.3620], [0.2465, 0.2535, 0.2456, 0.2544]),
    (6, 1): ([0.1748, 0.2553, 0.2142, 0.3557], [0.2482, 0.2652, 0.2332, 0.2534]),
    (6, 2): ([0.1748, 0.2551, 0.2160, 0.3541], [0.2470, 0.2657, 0.2329, 0.2544]),
    (6, 3): ([0.1748, 0.2558, 0.2133, 0.3561], [0.2482, 0.2660, 0.2325, 0.2533]),
    (6, 4): ([0.1754, 0.2530, 0.2172, 0.3544], [0.2476, 0.2652, 0.2324, 0.2548]),
    (6, 5): ([0.1741, 0.2556, 0.2180, 0.3523], [0.2452, 0.2669, 0.2339, 0.2540]),
}


def test_criterion_08_misspecification_table():
    base = make_problem("latin-square-theta1", structure=1)
    theta1 = base.theta
    theta2 = make_problem("latin-square-theta2", structure=1).theta
    table = misspec_table(base, theta1, theta2,
                          default_rho_tables("latin_square_4"), CFG)
    failures = []
    for row in table.rows:
        ref1, ref2 = MISSPEC_REFERENCE[(row.true_structure, row.working_structure)]
        dev1 = float(np.max(np.abs(np.array(row.weights_theta1) - ref1)))
        dev2 = float(np.max(np.abs(np.array(row.weights_theta2) - ref2)))
        if dev1 > 1e-2:
            failures.append(f"({row.true_structure},{row.working_structure}) theta1 dev {dev1:.4f}")
        if dev2 > 1e-2:
            failures.append(f"({row.true_structure},{row.working_structure}) theta2 dev {dev2:.4f}")
        if row.efficiency_theta1 < 0.998:
            failures.append(f"({row.true_structure},{row.working_structure}) eff1 {row.efficiency_theta1:.4f}")
        if row.efficiency_theta2 < 0.998:
            failures.append(f"({row.true_structure},{row.working_structure}) eff2 {row.efficiency_theta2:.4f}")
    _check(8, "misspecification table: 30 pairs, weights and efficiency floors",
           not failures, "; ".join(failures))


def test_criterion_09_24_sequence_support():
    # the reference listing's sequence labels are permutation-inverted
    # relative to its own matrix walkthrough; checked here on the
    # inversion-corrected labels (see the sparse-support pattern: 12
    # supported orderings, the rest exactly zero)
    pr = make_problem("latin-square-24seq-theta1", structure=2, rho=0.1)
    res = optimize(pr, OptimizerConfig(restarts=6, seed=17))
    weights = {s.label: float(w) for s, w in zip(res.design.sequences, res.design.weights)}
    blanks = ["ABDC", "ADBC", "ADCB", "BADC", "BDAC", "CABD",
              "CBAD", "DABC", "DBAC", "DBCA", "DCAB", "DCBA"]
    failures = []
    if abs(weights["CADB"] - 0.1735) > 1e-2:
        failures.append(f"w(CADB) = {weights['CADB']:.4f}")
    if abs(weights["CBDA"] - 0.1667) > 1e-2:
        failures.append(f"w(CBDA) = {weights['CBDA']:.4f}")
    for lbl in blanks:
        if weights[lbl] >= 1e-4:
            failures.append(f"w({lbl}) = {weights[lbl]:.2e} not zero")
    _check(9, "24-sequence sparse support with spot-checked weights",
           not failures, "; ".join(failures))


def test_criterion_10_grid_oracle_equivalence():
    failures = []
    for name, structure in TWO_SEQUENCE_FIXTURES:
        pr = make_problem(name, structure=structure)
        w_opt = optimize(pr, CFG).design.weights[0]
        w_grid = grid_oracle_2seq(pr, step=1e-4).weights[0]
        if abs(w_opt - w_grid) >= 1e-3:
            failures.append(f"{name}/{structure}: {w_opt:.5f} vs grid {w_grid:.5f}")
    _check(10, "optimizer matches the exhaustive grid oracle on every two-sequence fixture",
           not failures, "; ".join(failures))


def test_criterion_11_sandwich_collapse():
    failures = []
    rng = np.random.default_rng(8)
    for name, structure in PROPERTY_FIXTURES:
        pr = make_problem(name, structure=structure)
        asm = assemble(pr)
        k = len(pr.sequences)
        for w in (np.full(k, 1.0 / k), random_interior_weights(rng, k)):
            design = Design(pr.sequences, w / w.sum())
            naive = variance_report(asm, design)
            collapsed = variance_report(asm, design, true_corr=pr.working_correlation)
            gap = float(np.max(np.abs(collapsed.var_theta - naive.var_theta)))
            if gap >= 1e-8:
                failures.append(f"{name}/{structure}: gap {gap:.2e}")
    _check(11, "sandwich equals inverse information when truth matches the working structure",
           not failures, "; ".join(failures))


def test_criterion_12_derivative_checks():
    import zlib

    from crossover_design.families import mean

    failures = []
    h = 1e-6
    for name, structure in PROPERTY_FIXTURES:
        pr = make_problem(name, structure=structure)
        asm = assemble(pr)
        theta0 = pr.theta.to_array()
        rng = np.random.default_rng(zlib.crc32(f"{name}/{structure}".encode()))
        worst_mu = worst_grad = 0.0
        for _ in range(10):
            theta = theta0 + rng.uniform(-0.2, 0.2, size=theta0.size)
            asm_t = assemble(pr.with_theta(
                ParamVector.from_array(theta, pr.n_periods, pr.n_treatments)))
            for s in asm_t.per_sequence:
                fd = np.empty_like(s.dmu)
                for j in range(theta.size):
                    up, dn = theta.copy(), theta.copy()
                    up[j] += h
                    dn[j] -= h
                    fd[:, j] = (np.asarray(mean(pr.family, s.x @ up))
                                - np.asarray(mean(pr.family, s.x @ dn))) / (2 * h)
                rel = np.abs(s.dmu - fd) / np.maximum(np.abs(fd), 1e-8)
                worst_mu = max(worst_mu, float(np.max(rel)))
        k = len(pr.sequences)
        for _ in range(10):
            w = random_interior_weights(rng, k)
            _, grad = log_det_objective(asm, w, with_gradient=True)
            fds = np.empty(k)
            for j in range(k):
                up, dn = w.copy(), w.copy()
                up[j] += h
                dn[j] -= h
                fds[j] = (log_det_objective(asm, up) - log_det_objective(asm, dn)) / (2 * h)
            # relative to the gradient scale for components near zero, where
            # central differences cannot resolve 1e-5 relative
            scale = max(1.0, float(np.max(np.abs(fds))))
            rel = np.abs(grad - fds) / np.maximum.reduce(
                [np.abs(fds), np.abs(grad), np.full(k, 1e-4 * scale)]
            )
            worst_grad = max(worst_grad, float(np.max(rel)))
        if worst_mu >= 1e-5:
            failures.append(f"{name}/{structure}: dmu rel err {worst_mu:.2e}")
        if worst_grad >= 1e-5:
            failures.append(f"{name}/{structure}: gradient rel err {worst_grad:.2e}")
    _check(12, "analytic mean derivatives and objective gradient match finite differences",
           not failures, "; ".join(failures))


def test_criterion_13_two_stage_simulation():
    latin = parse_sequences(["ABCD", "BDAC", "CADB", "DCBA"], 4)
    theta1 = ParamVector.from_array(
        [-2, 0.25, 0, 0.75, 1, 5, -1.5, -3.5, 2.75, 0.75], 4, 4)
    theta2 = ParamVector.from_array(
        [0.5, 0.06, -0.53, -0.6, -0.35, 0.025, -0.23, 0.73, 0.23, 0.30], 4, 4)
    start = time.time()
    failures = []
    for label, theta, gate in [("case1", theta2, "band"), ("case2", theta1, "ratio")]:
        for rho in (0.1, 0.5, 0.9):
            pr = DesignProblem(4, 4, latin, Family.BINARY, theta,
                               CorrelationSpec.ar1(rho))
            report = two_stage_run(TwoStageConfig(
                problem=pr, n_total=400, pilot_fraction=0.3,
                replications=100, seed=20260808))
            ratio = report.mse_ratio
            if gate == "band" and not 0.7 <= ratio <= 1.4:
                failures.append(f"{label} rho={rho}: ratio {ratio:.3f} outside [0.7, 1.4]")
            if gate == "ratio" and not ratio > 1.5:
                failures.append(
                    f"{label} rho={rho}: ratio {ratio:.3f} <= 1.5 (asymptotic variance "
                    f"ratio of the two designs is ~1.0-1.07, so a stable fit cannot "
                    f"produce 1.5)"
                )
    elapsed = time.time() - start
    if elapsed >= 300:
        failures.append(f"runtime {elapsed:.0f}s exceeds 5 minutes")
    _check(13, "two-stage simulation: near-uniform case in band, non-uniform case ratio > 1.5",
           not failures, "; ".join(failures))


def test_criterion_14_cli_determinism(tmp_path):
    runner = CliRunner()
    config = {
        "schema_version": 1,
        "fixture": {"name": "latin-square-theta1", "structure": 2},
        "optimizer": {"restarts": 3, "seed": 5},
        "simulation": {"n_total": 80, "replications": 3, "seed": 5,
                       "optimizer": {"restarts": 2, "max_iters": 300}},
    }
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(config))
    outputs = []
    for tag in ("first", "second"):
        opt_csv = tmp_path / f"opt-{tag}.csv"
        sim_csv = tmp_path / f"sim-{tag}.csv"
        r1 = runner.invoke(cli_main, ["optimize", "--config", str(cfg_path),
                                      "--out-csv", str(opt_csv), "--no-timestamp"])
        r2 = runner.invoke(cli_main, ["simulate", "--config", str(cfg_path),
                                      "--rho", "0.3",
                                      "--out-replications-csv", str(sim_csv),
                                      "--no-timestamp"])
        assert r1.exit_code == 0, r1.output
        assert r2.exit_code == 0, r2.output
        outputs.append((opt_csv.read_bytes(), sim_csv.read_bytes()))
    ok = outputs[0] == outputs[1]
    _check(14, "repeated CLI runs with one seed produce byte-identical CSV",
           ok, "outputs differ between runs")
