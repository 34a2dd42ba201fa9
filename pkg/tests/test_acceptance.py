"""Acceptance criteria, one test per criterion.

Each test prints a single ``[ACCEPT n] PASS|FAIL`` line (visible even under
captured output) and then asserts. Run on its own with

    pytest tests/test_acceptance.py -v
"""

import math
import time

import numpy as np
import pytest

from thaguard import cli
from thaguard.components import TWO_PORT, Component, default_bend_params, bend_loss, synth_bend_filter
from thaguard.planner import PlanConstraints, search_min_stack, verify_plan
from thaguard.scheme import (
    Scheme,
    apply_countermeasure,
    build_double_pass,
    composite_transmittance,
    one_pass_transmittance,
)
from thaguard.security import (
    ProbeBudget,
    holevo_general,
    holevo_two_state,
    log10_photon_scale,
    mean_photon_number,
    two_state_gram,
)
from thaguard.spectrum import RawScan, TransmittanceSpectrum, WavelengthGrid, reduce_raw_scan

from _schemes import random_component, random_scheme


@pytest.fixture
def report(capsys):
    def emit(n, title, ok, detail):
        with capsys.disabled():
            print(f"\n[ACCEPT {n:>2}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, detail

    return emit


def test_criterion_01_photon_scale_constant(report):
    budget = ProbeBudget(10.0, 0.1, 1e8, "fixed_1550")
    k = log10_photon_scale(1550.0, budget)
    report(1, "photon scale exponent", abs(k - 11.893) <= 1e-3, f"log10(P*lambda/(h*c*f)) = {k:.6f}, target 11.893 +- 0.001")


def test_criterion_02_single_photon_anchor(report):
    budget = ProbeBudget(12.8e-12, 1.0, 1e8, "fixed_1550")
    mu = float(mean_photon_number(0.0, 1550.0, budget))
    report(2, "12.8 pW at 1550 nm, 100 MHz", abs(mu - 1.0) <= 5e-3, f"mu_p = {mu:.5f}, target 1.00 +- 0.005")


def test_criterion_03_low_regime(report):
    mu = float(mean_photon_number(-140.0, 1550.0, ProbeBudget(photon_energy_mode="fixed_1550")))
    chi = float(holevo_two_state(mu))
    report(3, "T = -140 dB", 5e-3 < chi < 1e-2, f"mu_p = {mu:.4e}, chi = {chi:.4e}, required in (5e-3, 1e-2)")


def test_criterion_04_high_regime(report):
    mu = float(mean_photon_number(-110.0, 1550.0, ProbeBudget(photon_energy_mode="fixed_1550")))
    chi = float(holevo_two_state(mu))
    x = (1 - math.exp(-2 * mu)) / 2
    closed = -x * math.log2(x) - (1 - x) * math.log2(1 - x)
    ok = chi > 0.95 and abs(chi - 0.968) <= 5e-3 and abs(chi - closed) <= 1e-12
    report(4, "T = -110 dB", ok, f"chi = {chi:.5f} (closed form {closed:.5f}), required > 0.95 and 0.968 +- 0.005")


def test_criterion_05_holevo_oracle(report):
    mus = list(np.linspace(0.0, 5.0, 50)) + [0.0, 20.0]
    t0 = time.perf_counter()
    gap = max(
        abs(float(holevo_two_state(mu)) - holevo_general(two_state_gram(math.exp(-2 * mu)), [0.5, 0.5]))
        for mu in mus
    )
    dt = time.perf_counter() - t0
    report(5, "two-state vs general Holevo", gap < 1e-10 and dt < 1.0, f"max gap {gap:.2e} over {len(mus)} points in {dt:.3f} s")


def test_criterion_06_bend_calibration(report, grid):
    params = default_bend_params(12.0, 1.0)
    lam = grid.points
    loss_1550 = -float(bend_loss(1550.0, params))
    long = lam >= 1830
    min_long = -float(np.max(bend_loss(lam[long], params)))

    rng = np.random.default_rng(6)
    base = random_scheme(rng, grid, n=3)
    before = composite_transmittance(base, grid).values_db
    after = composite_transmittance(apply_countermeasure(base, synth_bend_filter(params, grid, "W"), 0), grid).values_db
    shift = float(np.max((after - before)[long]))
    ok = loss_1550 <= 1.0 and min_long >= 30.0 and shift <= -60.0
    report(6, "12 mm / 1 m windings", ok,
           f"one-pass loss {loss_1550:.4f} dB at 1550 nm, >= {min_long:.2f} dB beyond 1830 nm, "
           f"double-pass shift <= {shift:.2f} dB beyond 1830 nm")


def test_criterion_07_composition_properties(report, grid):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    perm_bad = mono_bad = 0
    sym_gap = 0.0
    for _ in range(1000):
        s = random_scheme(rng, grid, reciprocal=bool(rng.integers(2)))
        comp = composite_transmittance(s, grid).values_db

        order = rng.permutation(len(s.path.outbound))
        shuffled = [s.path.outbound[i] for i in order]
        perm = Scheme(s.name, build_double_pass(shuffled, s.path.reflection.ref_db, s.catalog), s.catalog)
        perm_bad += not np.array_equal(composite_transmittance(perm, grid).values_db, comp)

        extra = random_component(rng, grid, "X")
        added = apply_countermeasure(s, extra, int(rng.integers(len(s.path.outbound) + 1)))
        mono_bad += bool(np.any(composite_transmittance(added, grid).values_db > comp))

        if all(np.array_equal(c.forward.values_db, c.backward.values_db) for c in s.catalog.values()):
            one = one_pass_transmittance(s, grid).values_db
            sym_gap = max(sym_gap, float(np.max(np.abs(comp - (2 * one + s.path.reflection.ref_db)))))
    dt = time.perf_counter() - t0
    ok = perm_bad == 0 and mono_bad == 0 and sym_gap <= 1e-12 and dt < 10.0
    report(7, "1000 random schemes", ok,
           f"permutation mismatches {perm_bad}, monotonicity violations {mono_bad}, "
           f"reciprocal symmetry gap {sym_gap:.1e} dB, {dt:.2f} s")


def test_criterion_08_reduce_round_trip(report):
    # stated literally: a gain of g dB in i_mes is expected to come back as -g
    rng = np.random.default_rng(8)
    g = rng.uniform(0.0, 60.0, 100)
    grid = WavelengthGrid(1500.0 + np.arange(100.0))
    i_ref = rng.uniform(0.5, 2.0, 100)
    out = reduce_raw_scan(RawScan(grid, i_ref, i_ref * 10 ** (g / 10), 1.0)).values_db
    err = float(np.max(np.abs(out - (-g))))
    sign_flipped = float(np.max(np.abs(out - g)))
    report(8, "raw-scan round trip", err <= 1e-12,
           f"max |T + g| = {err:.3g} dB; max |T - g| = {sign_flipped:.1e} dB "
           f"(T = -10 log10(I_ref*T_f/I_mes) maps a gain of g dB to +g)")


def test_criterion_09_sample_end_to_end(report, sample_dir, tmp_path):
    import json

    t0 = time.perf_counter()
    codes = {}
    for name in ("alice", "bob"):
        codes[name] = cli.main(["evaluate", "--scheme", str(sample_dir / f"{name}.json"), "--out", str(tmp_path)])
    dt = time.perf_counter() - t0
    a = json.loads((tmp_path / "alice_report.json").read_text())
    b = json.loads((tmp_path / "bob_report.json").read_text())
    checks = [
        abs(a["t_max"]["t_db"] + 71) <= 3, abs(a["t_max"]["wavelength_nm"] - 1673) <= 10,
        abs(a["t_min"]["t_db"] + 185) <= 5,
        abs(b["t_max"]["t_db"] + 64) <= 3, abs(b["t_max"]["wavelength_nm"] - 1801) <= 10,
        codes == {"alice": 2, "bob": 2}, dt < 5.0,
    ]
    report(9, "sample Alice and Bob through the CLI", all(checks),
           f"Alice max {a['t_max']['t_db']:g} dB @ {a['t_max']['wavelength_nm']:g} nm, "
           f"min {a['t_min']['t_db']:g} dB @ {a['t_min']['wavelength_nm']:g} nm; "
           f"Bob max {b['t_max']['t_db']:g} dB @ {b['t_max']['wavelength_nm']:g} nm; exit codes {codes}; {dt:.2f} s")


def test_criterion_10_planner(report, grid, alice, bob, countermeasures, sample_dir):
    import itertools

    from thaguard.scheme import load_scheme

    t0 = time.perf_counter()
    lines = []
    ok = True
    assert len(countermeasures) == 3 and all(e.max_count <= 2 for e in countermeasures)
    for label, scheme, constraints in [
        ("alice", alice, PlanConstraints()),
        ("bob", bob, PlanConstraints()),
        ("alice tight", alice, PlanConstraints(op_loss_budget_db=1.0)),
        ("bob tight", bob, PlanConstraints(op_loss_budget_db=1.7)),
    ]:
        ex = search_min_stack(countermeasures, scheme, constraints=constraints, grid=grid, strategy="exhaustive")
        gr = search_min_stack(countermeasures, scheme, constraints=constraints, grid=grid, strategy="greedy")
        minimal = None
        for counts in itertools.product(*(range(e.max_count + 1) for e in countermeasures)):
            picks = {e.id: n for e, n in zip(countermeasures, counts) if n}
            if verify_plan(picks, scheme, countermeasures, constraints=constraints, grid=grid)["pass"]:
                minimal = sum(counts) if minimal is None else min(minimal, sum(counts))
        case_ok = gr.feasible == ex.feasible == (minimal is not None)
        if ex.feasible:
            case_ok &= ex.total == minimal
        ok &= case_ok
        lines.append(f"{label}: exhaustive {dict(ex.picks)} greedy {dict(gr.picks)} oracle min {minimal}")

    protected = load_scheme(sample_dir / "alice_protected.json", grid=grid)
    stack = verify_plan({"ISO": 1, "CWDM": 1, "WIND12": 1}, alice, countermeasures, grid=grid)
    from thaguard.security import evaluate

    curve = evaluate(composite_transmittance(protected, grid))
    ok &= stack["pass"] and curve.worst_chi < 1e-2
    dt = time.perf_counter() - t0
    ok &= dt < 30.0
    report(10, "planner", ok, "; ".join(lines)
           + f"; isolator+CWDM+windings worst chi {stack['chi']['worst_chi']:.3g} "
             f"(protected scheme file {curve.worst_chi:.3g}); {dt:.2f} s")
