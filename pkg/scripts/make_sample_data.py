#!/usr/bin/env python3
"""Regenerate the bundled sample dataset under src/thaguard/data/sample/.

The curves are polylines through a few reference values (PM insertion
loss at 1550 nm and its double-pass loss at 2075 nm, the Alice and Bob
composite extrema, PBS behaviour). Element spectra that are not individually anchored (the VOA
and the PBS 2->3 leakage) are solved for so that the composites pass
through their quoted extrema with Ref = -40 dB.

Deterministic: running it twice gives byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from thaguard.spectrum import TransmittanceSpectrum, default_grid, spectrum_to_csv

OUT = Path(__file__).resolve().parents[1] / "src" / "thaguard" / "data" / "sample"
REF_DB = -40.0

# one-pass PM transmittance, forward direction
PM_KNOTS = [
    (1500, -3.1), (1550, -3.0), (1600, -3.0), (1650, -3.1), (1700, -3.6), (1750, -4.4),
    (1800, -5.9), (1850, -8.0), (1900, -11.0), (1950, -14.5), (2000, -18.5), (2050, -23.0),
    (2075, -26.0), (2100, -25.0),
]
# Alice composite: max -71 dB @ 1673 nm, min -185 dB @ 2072 nm
ALICE_KNOTS = [
    (1500, -106.0), (1580, -106.0), (1620, -95.0), (1673, -71.0), (1700, -78.0), (1750, -100.0),
    (1800, -118.0), (1900, -145.0), (2000, -168.0), (2072, -185.0), (2100, -180.0),
]
# Bob composite: max -64 dB @ 1801 nm, min -101 dB @ 2066 nm
BOB_KNOTS = [
    (1500, -82.0), (1560, -80.0), (1650, -74.0), (1750, -67.0), (1801, -64.0), (1850, -68.0),
    (1950, -82.0), (2066, -101.0), (2100, -97.0),
]
# PBS port-to-port transmittance for a polarised source
PBS_THROUGH_KNOTS = [(1500, -0.4), (1700, -0.5), (1800, -1.6), (1900, -3.0), (1994, -4.5), (2100, -4.7)]


def poly(knots, x):
    k = np.array(knots, dtype=float)
    return np.interp(x, k[:, 0], k[:, 1])


def write(name, values, grid, comment, unc=None):
    s = TransmittanceSpectrum(grid, np.round(values, 4), unc)
    (OUT / name).write_text(spectrum_to_csv(s, comment), encoding="utf-8")


def dump(name, obj):
    (OUT / name).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    grid = default_grid()
    x = grid.points

    pm_f = poly(PM_KNOTS, x)
    pm_b = pm_f - 0.1
    pbs_through = poly(PBS_THROUGH_KNOTS, x)
    pbs_12 = pbs_through
    pbs_21 = pbs_through - 0.05
    pbs_13 = pbs_through - 0.1
    pbs_31 = pbs_through - 0.1

    alice = poly(ALICE_KNOTS, x)
    voa = (alice - REF_DB - pm_f - pm_b) / 2.0
    voa_f, voa_b = voa + 0.05, voa - 0.05

    bob = poly(BOB_KNOTS, x)
    pbs_23 = bob - pbs_12 - pm_f - pm_b - pbs_31
    pbs_32 = pbs_23 - 0.3

    src = "sample reconstruction from quoted anchors; see README.md"
    write("pm_forward.csv", pm_f, grid, f"phase modulator, forward\n{src}", np.full(x.size, 0.3))
    write("pm_backward.csv", pm_b, grid, f"phase modulator, backward\n{src}", np.full(x.size, 0.3))
    write("voa_eo_forward.csv", voa_f, grid, f"electro-optical VOA at maximal attenuation, forward\n{src}")
    write("voa_eo_backward.csv", voa_b, grid, f"electro-optical VOA at maximal attenuation, backward\n{src}")
    for pair, vals in (("12", pbs_12), ("21", pbs_21), ("13", pbs_13), ("31", pbs_31), ("23", pbs_23), ("32", pbs_32)):
        write(f"pbs_{pair}.csv", vals, grid, f"PBS port {pair[0]} -> {pair[1]}, polarised source\n{src}")

    pbs_pairs = {p: f"pbs_{p}.csv" for p in ("12", "21", "13", "31", "23", "32")}
    dump("pm.json", {"id": "PM", "kind": "two-port",
                     "legs": {"forward": "pm_forward.csv", "backward": "pm_backward.csv"}, "provenance": "measured"})
    dump("voa_eo.json", {"id": "VOA", "kind": "two-port",
                         "legs": {"forward": "voa_eo_forward.csv", "backward": "voa_eo_backward.csv"},
                         "provenance": "measured"})
    dump("isolator.json", {"id": "ISO", "kind": "two-port", "model": {"name": "isolator", "params": {
        "fwd_loss_db": 0.8, "iso_floor_db": 45.0, "degradation_rate_db_per_nm": 0.05, "band_center_nm": 1550.0}}})
    dump("cwdm.json", {"id": "CWDM", "kind": "two-port", "model": {"name": "wdm", "params": {
        "passbands": [[1540.0, 1560.0, 0.5]], "stop_floor_db": 25.0, "leak_windows": [[1850.0, 2100.0, 10.0]]}}})
    dump("windings_12mm.json", {"id": "WIND12", "kind": "two-port",
                                "model": {"name": "bend-filter", "params": {"radius": 12.0, "length": 1.0}}})

    dump("alice_components.json", {"components": ["pm.json", "voa_eo.json"]})
    dump("bob_components.json", {"components": [
        {"id": "PBS1", "kind": "three-port", "legs": {"pairs": pbs_pairs}, "provenance": "measured"},
        {"id": "PBS2", "kind": "three-port", "legs": {"pairs": pbs_pairs}, "provenance": "measured"},
        {"id": "PM1", "kind": "two-port", "legs": {"forward": "pm_forward.csv", "backward": "pm_backward.csv"}},
        {"id": "PM2", "kind": "two-port", "legs": {"forward": "pm_forward.csv", "backward": "pm_backward.csv"}},
    ]})
    dump("countermeasure_components.json", {"components": ["isolator.json", "cwdm.json", "windings_12mm.json"]})

    alice_out = [{"component": "VOA", "leg": "forward"}, {"component": "PM", "leg": "forward"}]
    dump("alice.json", {"name": "alice", "catalog": "alice_components.json",
                        "outbound": alice_out, "reflection": {"flat_db": REF_DB}, "inbound": "mirror"})
    dump("alice_protected.json", {
        "name": "alice-protected", "catalog": ["alice_components.json", "countermeasure_components.json"],
        "outbound": [{"component": "ISO", "leg": "forward"}, {"component": "CWDM", "leg": "forward"},
                     {"component": "WIND12", "leg": "forward"}] + alice_out,
        "reflection": {"flat_db": REF_DB}, "inbound": "mirror"})
    bob_obj = {
        "name": "bob", "catalog": "bob_components.json",
        "outbound": [{"component": "PBS1", "leg": "12"}, {"component": "PM1", "leg": "forward"}],
        "reflection": {"component": "PBS2", "leg": "23"},
        "inbound": "mirror",
        "overrides": [{"index": 1, "component": "PM2", "leg": "backward"},
                      {"index": 0, "component": "PBS1", "leg": "31"}],
    }
    dump("bob.json", bob_obj)
    dump("bob_protected.json", {
        **bob_obj, "name": "bob-protected", "catalog": ["bob_components.json", "countermeasure_components.json"],
        "outbound": [{"component": "ISO", "leg": "forward"}, {"component": "ISO", "leg": "forward"},
                     {"component": "CWDM", "leg": "forward"}, {"component": "WIND12", "leg": "forward"}]
        + bob_obj["outbound"],
        "overrides": [{"index": 5, "component": "PM2", "leg": "backward"},
                      {"index": 4, "component": "PBS1", "leg": "31"}],
    })
    dump("countermeasures.json", {"entries": [
        {"component": "isolator.json", "max_count": 2},
        {"component": "cwdm.json", "max_count": 2},
        {"component": "windings_12mm.json", "max_count": 2},
    ]})
    dump("budget.json", {"input_power_w": 10.0, "sideband_ratio_m": 0.1, "rep_rate_hz": 1e8,
                         "photon_energy_mode": "per_wavelength"})
    dump("thresholds.json", {"chi_max": 0.01, "t_secure_db": -140.0})

    # raw scan for the reduce command: a ~3 dB element, no filter in the beam
    lines = ["# example raw scan, intensities in arbitrary units", "wavelength_nm,i_ref,i_mes,t_f"]
    for wl in range(1500, 2101, 50):
        lines.append(f"{wl},1,0.5,1")
    (OUT / "raw_scan.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
