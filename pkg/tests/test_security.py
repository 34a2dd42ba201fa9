import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thaguard.security import (
    ProbeBudget,
    SecurityError,
    SecurityThresholds,
    binary_entropy,
    evaluate,
    holevo_general,
    holevo_two_state,
    log10_photon_scale,
    loophole_intervals,
    mean_photon_number,
    photon_energy,
    two_state_gram,
)
from thaguard.spectrum import TransmittanceSpectrum, WavelengthGrid, default_grid

FIXED = ProbeBudget(photon_energy_mode="fixed_1550")


def _h(x):
    """Reference binary entropy written out with the math module."""
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def _explicit_holevo(states, probs):
    """Holevo quantity from explicit state vectors: S(sum p |psi><psi|)."""
    rho = sum(p * np.outer(v, v.conj()) for v, p in zip(states, probs))
    ev = np.linalg.eigvalsh(rho)
    ev = ev[ev > 1e-300]
    return float(-np.sum(ev * np.log2(ev)))


# photon budget ---------------------------------------------------------------


def test_photon_energy_1550():
    assert photon_energy(1550.0) == pytest.approx(1.28158e-19, rel=1e-5)
    assert photon_energy(2000.0, "fixed_1550") == photon_energy(1550.0)


def test_exponent_constant():
    assert log10_photon_scale(1550.0, FIXED) == pytest.approx(11.893, abs=1e-3)


def test_one_photon_anchor():
    # 12.8 pW delivered at 1550 nm, 100 MHz, M = 1
    t_db = 10 * math.log10(12.8e-12 / 10.0)
    mu = mean_photon_number(t_db, 1550.0, ProbeBudget(sideband_ratio_m=1.0))
    assert mu == pytest.approx(1.0, rel=5e-3)


def test_mu_at_minus_140():
    # hand evaluation: 0.1 * 10**(-14 + 11.89225)
    mu = mean_photon_number(-140.0, 1550.0, FIXED)
    assert mu == pytest.approx(0.1 * 10 ** (-14 + 11.892255), rel=1e-5)
    assert mu == pytest.approx(7.81e-4, rel=2e-3)


def test_zero_sideband_ratio():
    assert mean_photon_number(-50.0, 1600.0, ProbeBudget(sideband_ratio_m=0.0)) == 0.0


def test_per_wavelength_mode_gives_more_photons_at_long_wavelength():
    b = ProbeBudget()
    assert mean_photon_number(-100, 2100, b) / mean_photon_number(-100, 1550, b) == pytest.approx(2100 / 1550)


@given(st.floats(-250, 0), st.floats(-250, 0))
def test_mu_monotone_in_t(a, b):
    lo, hi = min(a, b), max(a, b)
    assert mean_photon_number(lo, 1700, FIXED) <= mean_photon_number(hi, 1700, FIXED)


def test_budget_validation():
    with pytest.raises(SecurityError):
        ProbeBudget(sideband_ratio_m=1.5)
    with pytest.raises(SecurityError):
        ProbeBudget(rep_rate_hz=0)
    with pytest.raises(SecurityError):
        ProbeBudget(photon_energy_mode="fixed_1310")
    assert ProbeBudget(input_power_w=20).exceeds_fiber_fuse_cap
    assert not ProbeBudget().exceeds_fiber_fuse_cap


def test_thresholds_validation():
    with pytest.raises(SecurityError):
        SecurityThresholds(chi_max=1.0)
    with pytest.raises(SecurityError):
        SecurityThresholds.from_json({"chi": 0.1})


# entropy / Holevo --------------------------------------------------------------


@given(st.floats(0, 1))
def test_binary_entropy_matches_reference_and_is_symmetric(x):
    assert binary_entropy(x) == pytest.approx(_h(x), abs=1e-12)
    assert binary_entropy(x) == pytest.approx(binary_entropy(1 - x), abs=1e-12)
    assert 0.0 <= binary_entropy(x) <= 1.0


def test_binary_entropy_domain():
    with pytest.raises(SecurityError):
        binary_entropy(1.2)


def test_holevo_two_state_examples():
    assert holevo_two_state(0.0) == 0.0
    assert holevo_two_state(100.0) == pytest.approx(1.0, abs=1e-12)
    assert holevo_two_state(0.78) == pytest.approx(_h((1 - math.exp(-1.56)) / 2), abs=1e-12)
    assert holevo_two_state(0.78) == pytest.approx(0.968, abs=1e-3)
    with pytest.raises(SecurityError):
        holevo_two_state(-0.1)


def test_holevo_tiny_mu_precision():
    # series h(x) ~ x log2(e/x) for x = mu, mu -> 0
    mu = 1e-12
    assert holevo_two_state(mu) == pytest.approx(mu * math.log2(math.e / mu), rel=1e-6)


@given(st.floats(0, 30), st.floats(0, 30))
def test_holevo_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert holevo_two_state(lo) <= holevo_two_state(hi) <= 1.0


def test_holevo_general_examples():
    assert holevo_general([[1.0]], [1.0]) == 0.0
    assert holevo_general(two_state_gram(0.0), [0.5, 0.5]) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("s", [0.0, 0.1, 0.5, 0.9, 1.0])
def test_holevo_general_vs_explicit_states(s):
    theta = math.acos(s) / 2
    states = [np.array([math.cos(theta), math.sin(theta)]), np.array([math.cos(theta), -math.sin(theta)])]
    gram = np.array([[np.vdot(a, b) for b in states] for a in states])
    assert holevo_general(gram, [0.5, 0.5]) == pytest.approx(_explicit_holevo(states, [0.5, 0.5]), abs=1e-12)
    assert holevo_general(gram, [0.5, 0.5]) == pytest.approx(_h((1 - s) / 2), abs=1e-12)


def test_holevo_general_random_ensembles():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n, d = int(rng.integers(2, 6)), int(rng.integers(2, 5))
        states = [v / np.linalg.norm(v) for v in rng.normal(size=(n, d)) + 1j * rng.normal(size=(n, d))]
        p = rng.dirichlet(np.ones(n))
        gram = np.array([[np.vdot(a, b) for b in states] for a in states])
        assert holevo_general(gram, p) == pytest.approx(_explicit_holevo(states, p), abs=1e-10)


@pytest.mark.parametrize(
    "gram,probs",
    [
        ([[1, 0.5], [0.2, 1]], [0.5, 0.5]),  # not Hermitian
        ([[2, 0], [0, 1]], [0.5, 0.5]),  # not unit diagonal
        ([[1, 2], [2, 1]], [0.5, 0.5]),  # not PSD
        ([[1, 0], [0, 1]], [0.7, 0.7]),  # not a distribution
        ([[1, 0], [0, 1]], [1.0]),  # shape mismatch
    ],
)
def test_holevo_general_rejects(gram, probs):
    with pytest.raises(SecurityError):
        holevo_general(gram, probs)


@given(st.floats(0, 20))
def test_two_state_matches_general(mu):
    assert abs(holevo_two_state(mu) - holevo_general(two_state_gram(math.exp(-2 * mu)), [0.5, 0.5])) < 1e-10


# evaluate --------------------------------------------------------------------


def test_regimes():
    low = holevo_two_state(mean_photon_number(-140.0, 1550.0, FIXED))
    high = holevo_two_state(mean_photon_number(-110.0, 1550.0, FIXED))
    assert 5e-3 < low < 1e-2
    assert high > 0.95


def test_evaluate_flat_minus_200():
    g = default_grid()
    curve = evaluate(TransmittanceSpectrum.flat(g, -200.0))
    assert curve.worst_chi < 1e-6 and curve.loopholes == [] and curve.secure


def test_evaluate_flat_minus_100():
    g = default_grid()
    assert evaluate(TransmittanceSpectrum.flat(g, -100.0)).loopholes == [(1500.0, 2100.0)]


def test_single_point_loophole():
    g = WavelengthGrid.uniform(1500, 1510, 1)
    vals = np.full(len(g), -200.0)
    vals[4] = -60.0
    curve = evaluate(TransmittanceSpectrum(g, vals))
    assert curve.loopholes == [(1504.0, 1504.0)]
    assert curve.worst_point()["wavelength_nm"] == 1504.0


def test_loophole_runs():
    g = WavelengthGrid.uniform(1, 8, 1)
    assert loophole_intervals(g, [1, 1, 0, 0, 1, 0, 1, 1]) == [(1.0, 2.0), (5.0, 5.0), (7.0, 8.0)]
    assert loophole_intervals(g, [0] * 8) == []


def test_curve_csv_and_report():
    g = WavelengthGrid.uniform(1500, 1502, 1)
    curve = evaluate(TransmittanceSpectrum(g, [-150.0, -100.0, -150.0]))
    lines = curve.to_csv().splitlines()
    assert lines[0] == "wavelength_nm,t_db,mu_p,chi"
    assert lines[2].startswith("1501,-100,")
    rep = curve.report()
    assert rep["loopholes"] == [{"lo_nm": 1501.0, "hi_nm": 1501.0}]
    assert rep["t_max"] == {"wavelength_nm": 1501.0, "t_db": -100.0}
    assert rep["budget"]["sideband_ratio_m"] == 0.1


def test_loopholes_grow_when_components_removed(alice, grid):
    from thaguard.scheme import apply_countermeasure, composite_transmittance
    from thaguard.components import synth_isolator

    protected = apply_countermeasure(alice, synth_isolator(0.8, 45, 0.05, grid=grid, id="I"))
    with_iso = evaluate(composite_transmittance(protected, grid)).chi > 1e-2
    without = evaluate(composite_transmittance(alice, grid)).chi > 1e-2
    assert np.all(without[with_iso])
