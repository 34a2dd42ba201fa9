"""Optical elements: measured spectra and synthetic parametric models.

A two-port element carries a forward and a backward spectrum. A three-port
element (a polarising beam splitter, say) carries one spectrum per ordered
port pair, e.g. ``"12"`` for port 1 to port 2. Port-pair spectra are treated
as independent measurements; no reciprocity or energy conservation is
assumed between them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .spectrum import (
    SpectrumError,
    TransmittanceSpectrum,
    WavelengthGrid,
    default_grid,
    read_spectrum_csv,
    resample,
)


class ComponentError(ValueError):
    """Bad component definition or parameters."""


TWO_PORT = "two-port"
THREE_PORT = "three-port"
DIRECTIONS = ("forward", "backward")
PORT_PAIRS = ("12", "13", "21", "23", "31", "32")


def parse_leg(leg) -> str:
    """Normalise a leg label.

    Accepts ``"forward"``/``"f"``, ``"backward"``/``"b"``, port pairs as
    ``"12"``, ``"1->2"``, ``"1-2"`` or a tuple ``(1, 2)``.
    """
    if isinstance(leg, (tuple, list)) and len(leg) == 2:
        leg = f"{leg[0]}{leg[1]}"
    text = str(leg).strip().lower()
    aliases = {"f": "forward", "fwd": "forward", "b": "backward", "bwd": "backward"}
    text = aliases.get(text, text)
    if text in DIRECTIONS:
        return text
    pair = text.replace("->", "").replace("-", "").replace(">", "")
    if pair in PORT_PAIRS:
        return pair
    raise ComponentError(f"unknown leg {leg!r}")


def reverse_leg(leg: str) -> str:
    """forward <-> backward, ``ij`` <-> ``ji``."""
    leg = parse_leg(leg)
    if leg == "forward":
        return "backward"
    if leg == "backward":
        return "forward"
    return leg[::-1]


@dataclass(frozen=True)
class Provenance:
    kind: str = "measured"
    model: str | None = None
    params: Mapping[str, object] = field(default_factory=dict)

    def to_json(self):
        if self.kind == "measured":
            return "measured"
        return {"synthetic": {"name": self.model, "params": dict(self.params)}}

    @classmethod
    def from_json(cls, obj) -> "Provenance":
        if obj is None or obj == "measured":
            return cls()
        if isinstance(obj, dict) and "synthetic" in obj:
            syn = obj["synthetic"]
            return cls("synthetic", syn.get("name"), dict(syn.get("params", {})))
        raise ComponentError(f"unrecognised provenance {obj!r}")


@dataclass(frozen=True)
class Component:
    """A named optical element with spectra keyed by leg label."""

    id: str
    kind: str
    spectra: Mapping[str, TransmittanceSpectrum]
    provenance: Provenance = field(default_factory=Provenance)

    def __post_init__(self):
        if not self.id:
            raise ComponentError("component id must be non-empty")
        if self.kind == TWO_PORT:
            missing = [d for d in DIRECTIONS if d not in self.spectra]
            if missing:
                raise ComponentError(f"{self.id}: {missing[0]} spectrum missing")
            extra = set(self.spectra) - set(DIRECTIONS)
            if extra:
                raise ComponentError(f"{self.id}: two-port component has port-pair legs {sorted(extra)}")
        elif self.kind == THREE_PORT:
            if not self.spectra:
                raise ComponentError(f"{self.id}: three-port component has no port-pair spectra")
            bad = set(self.spectra) - set(PORT_PAIRS)
            if bad:
                raise ComponentError(f"{self.id}: three-port component has legs {sorted(bad)}")
        else:
            raise ComponentError(f"{self.id}: unknown kind {self.kind!r}")
        grids = {s.grid for s in self.spectra.values()}
        if len(grids) != 1:
            raise ComponentError(f"{self.id}: spectra are not on one grid")
        object.__setattr__(self, "spectra", dict(sorted(self.spectra.items())))

    @property
    def grid(self) -> WavelengthGrid:
        return next(iter(self.spectra.values())).grid

    @property
    def forward(self) -> TransmittanceSpectrum:
        return self.leg("forward")

    @property
    def backward(self) -> TransmittanceSpectrum:
        return self.leg("backward")

    def has_leg(self, leg) -> bool:
        return parse_leg(leg) in self.spectra

    def leg(self, leg) -> TransmittanceSpectrum:
        name = parse_leg(leg)
        if name in DIRECTIONS and self.kind != TWO_PORT:
            raise ComponentError(f"{self.id}: three-port component has no {name} leg; use a port pair")
        if name not in DIRECTIONS and self.kind != THREE_PORT:
            raise ComponentError(f"{self.id}: two-port component has no port pair {name}")
        try:
            return self.spectra[name]
        except KeyError:
            raise ComponentError(f"{self.id}: port pair {name[0]}->{name[1]} spectrum missing") from None


def _common_grid(spectra: Mapping[str, TransmittanceSpectrum], grid, cid):
    target = grid if grid is not None else next(iter(spectra.values())).grid
    out = {}
    for name, s in spectra.items():
        try:
            out[name] = resample(s, target)
        except SpectrumError as exc:
            raise ComponentError(f"{cid} leg {name}: {exc}") from None
    return out


def load_component(
    id: str,
    kind: str = TWO_PORT,
    forward=None,
    backward=None,
    pairs: Mapping[str, object] | None = None,
    grid: WavelengthGrid | None = None,
    allow_gain: bool = False,
) -> Component:
    """Build a measured component from spectrum CSV files.

    ``forward``/``backward`` (two-port) or ``pairs`` (three-port) may be
    paths or already-loaded spectra. All legs are resampled onto ``grid``
    when given, otherwise onto the grid of the first leg.
    """

    def _get(src):
        if isinstance(src, TransmittanceSpectrum):
            return src.require_passive(id) if not allow_gain else src
        return read_spectrum_csv(src, allow_gain=allow_gain)

    if kind == TWO_PORT:
        if pairs:
            raise ComponentError(f"{id}: two-port component given port-pair files")
        for name, src in (("forward", forward), ("backward", backward)):
            if src is None:
                raise ComponentError(f"{id}: {name} spectrum missing")
        spectra = {"forward": _get(forward), "backward": _get(backward)}
    elif kind == THREE_PORT:
        if not pairs:
            raise ComponentError(f"{id}: three-port component needs port-pair spectra")
        spectra = {parse_leg(k): _get(v) for k, v in pairs.items()}
    else:
        raise ComponentError(f"{id}: unknown kind {kind!r}")
    return Component(id, kind, _common_grid(spectra, grid, id))


# --- synthetic models ---------------------------------------------------------


def _two_port(cid, grid, fwd, bwd, model, params) -> Component:
    return Component(
        cid,
        TWO_PORT,
        {"forward": TransmittanceSpectrum(grid, fwd), "backward": TransmittanceSpectrum(grid, bwd)},
        Provenance("synthetic", model, params),
    )


def synth_attenuator(loss_db: float, grid: WavelengthGrid | None = None, id: str = "attenuator") -> Component:
    """Flat, reciprocal attenuation of ``loss_db`` in both directions."""
    grid = grid or default_grid()
    if not math.isfinite(loss_db) or loss_db < 0:
        raise ComponentError(f"attenuator loss must be finite and >= 0 dB, got {loss_db}")
    flat = np.full(len(grid), -float(loss_db))
    return _two_port(id, grid, flat, flat, "attenuator", {"loss_db": loss_db})


def synth_isolator(
    fwd_loss_db: float,
    iso_floor_db: float,
    degradation_rate_db_per_nm: float,
    band_center_nm: float = 1550.0,
    grid: WavelengthGrid | None = None,
    id: str = "isolator",
) -> Component:
    """Isolator whose backward isolation degrades linearly away from its band.

    Backward leg is ``-iso_floor + rate*(lambda - center)``, never allowed
    to exceed the flat forward leg ``-fwd_loss``.
    """
    grid = grid or default_grid()
    vals = (fwd_loss_db, iso_floor_db, degradation_rate_db_per_nm, band_center_nm)
    if not all(math.isfinite(v) for v in vals):
        raise ComponentError("isolator parameters must be finite")
    if fwd_loss_db < 0 or iso_floor_db <= fwd_loss_db:
        raise ComponentError("isolator needs iso_floor_db > fwd_loss_db >= 0")
    if degradation_rate_db_per_nm < 0:
        raise ComponentError("isolator degradation rate must be >= 0 dB/nm")
    fwd = np.full(len(grid), -float(fwd_loss_db))
    bwd = -iso_floor_db + degradation_rate_db_per_nm * (grid.points - band_center_nm)
    bwd = np.minimum(bwd, fwd)
    params = {
        "fwd_loss_db": fwd_loss_db,
        "iso_floor_db": iso_floor_db,
        "degradation_rate_db_per_nm": degradation_rate_db_per_nm,
        "band_center_nm": band_center_nm,
    }
    return _two_port(id, grid, fwd, bwd, "isolator", params)


def _intervals(items, what):
    out = []
    for item in items:
        try:
            lo, hi, loss = (float(x) for x in item)
        except (TypeError, ValueError):
            raise ComponentError(f"{what} entries must be (lo_nm, hi_nm, loss_db)") from None
        if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(loss)) or hi < lo or loss < 0:
            raise ComponentError(f"bad {what} ({lo}, {hi}, {loss})")
        out.append((lo, hi, loss))
    return out


def synth_wdm(
    passbands: Sequence[tuple[float, float, float]],
    stop_floor_db: float,
    leak_windows: Sequence[tuple[float, float, float]] = (),
    grid: WavelengthGrid | None = None,
    id: str = "wdm",
) -> Component:
    """Piecewise-flat WDM filter with out-of-band leak windows.

    Passbands give ``-pass_loss``, leak windows ``-leak_db`` and everything
    else ``-stop_floor_db``. Intervals are closed. Where passbands overlap
    each other the lowest loss wins, and likewise for leak windows, so the
    result does not depend on list order.
    """
    grid = grid or default_grid()
    bands = _intervals(passbands, "passband")
    leaks = _intervals(leak_windows, "leak window")
    if not math.isfinite(stop_floor_db) or stop_floor_db < 0:
        raise ComponentError("stop_floor_db must be finite and >= 0")
    lo_span, hi_span = grid.span
    for lo, hi, loss in bands + leaks:
        if lo < lo_span or hi > hi_span:
            raise ComponentError(f"interval {lo:g}-{hi:g} nm outside grid span {lo_span:g}-{hi_span:g} nm")
    for lo, hi, loss in bands:
        if loss >= stop_floor_db:
            raise ComponentError(f"passband loss {loss} dB must be below the stop floor {stop_floor_db} dB")
        for llo, lhi, _ in leaks:
            if lo <= lhi and llo <= hi:
                raise ComponentError(f"passband {lo:g}-{hi:g} nm overlaps leak window {llo:g}-{lhi:g} nm")
    loss = np.full(len(grid), float(stop_floor_db))
    x = grid.points
    for group in (leaks, bands):
        for lo, hi, band_loss in group:
            inside = (x >= lo) & (x <= hi)
            loss[inside] = np.minimum(loss[inside], band_loss)
    params = {
        "passbands": [list(b) for b in sorted(bands)],
        "stop_floor_db": stop_floor_db,
        "leak_windows": [list(w) for w in sorted(leaks)],
    }
    return _two_port(id, grid, -loss, -loss, "wdm", params)


@dataclass(frozen=True)
class BendLossParams:
    """Macrobend filter made of ``length`` metres wound at ``radius`` mm.

    Loss per metre is ``floor + amplitude*exp(rate*(lambda - knee))``,
    capped at ``cap_db_per_m``.
    """

    radius: float
    length: float
    amplitude_a: float
    rate_b: float
    knee_lambda: float
    floor_db: float
    cap_db_per_m: float = 60.0

    def __post_init__(self):
        for name in ("radius", "length", "amplitude_a", "rate_b", "knee_lambda", "floor_db", "cap_db_per_m"):
            if not math.isfinite(getattr(self, name)):
                raise ComponentError(f"bend-loss {name} must be finite")
        if self.radius <= 0:
            raise ComponentError(f"bend radius must be > 0 mm, got {self.radius}")
        if self.length < 0:
            raise ComponentError(f"fibre length must be >= 0 m, got {self.length}")
        # non-negative amplitude and rate keep the model monotone in wavelength
        if self.amplitude_a < 0 or self.rate_b < 0:
            raise ComponentError("bend-loss amplitude and rate must be >= 0")
        if self.floor_db < 0 or self.cap_db_per_m < 0:
            raise ComponentError("bend-loss floor and cap must be >= 0 dB/m")


# 12 mm radius, 1 m of standard single-mode fibre. Chosen so the loss is
# ~0.16 dB at 1550 nm and >= 30 dB from 1830 nm on, saturating at 60 dB/m.
BEND_12MM = dict(amplitude_a=30.0, rate_b=0.02, knee_lambda=1830.0, floor_db=0.05, cap_db_per_m=60.0)
CALIBRATED_BEND_RADII = {12.0: BEND_12MM}


def default_bend_params(radius: float = 12.0, length: float = 1.0) -> BendLossParams:
    """Calibrated parameters for a shipped radius.

    Only 12 mm is calibrated; other radii need explicit parameters.
    """
    if radius <= 0:
        raise ComponentError(f"bend radius must be > 0 mm, got {radius}")
    try:
        calib = CALIBRATED_BEND_RADII[float(radius)]
    except KeyError:
        raise ComponentError(
            f"no calibrated bend-loss model for radius {radius:g} mm; "
            f"shipped radii: {sorted(CALIBRATED_BEND_RADII)}; supply amplitude_a, rate_b, "
            "knee_lambda and floor_db explicitly"
        ) from None
    return BendLossParams(radius=float(radius), length=float(length), **calib)


def bend_loss(lambda_nm, params: BendLossParams):
    """Transmittance (dB, <= 0) of the bent fibre at ``lambda_nm``."""
    lam = np.asarray(lambda_nm, dtype=float)
    # clip the exponent so far-IR inputs saturate at the cap instead of overflowing
    expo = np.minimum(params.rate_b * (lam - params.knee_lambda), 700.0)
    per_m = np.minimum(params.cap_db_per_m, params.floor_db + params.amplitude_a * np.exp(expo))
    out = -params.length * per_m
    return out if np.ndim(lambda_nm) else float(out)


def synth_bend_filter(params: BendLossParams, grid: WavelengthGrid | None = None, id: str = "windings") -> Component:
    grid = grid or default_grid()
    vals = bend_loss(grid.points, params)
    p = {k: getattr(params, k) for k in params.__dataclass_fields__}
    return _two_port(id, grid, vals, vals, "bend-filter", p)


def _bend_from_params(grid, id, radius=12.0, length=1.0, **rest):
    if rest:
        required = ("amplitude_a", "rate_b", "knee_lambda", "floor_db")
        missing = [k for k in required if k not in rest]
        if missing:
            raise ComponentError(f"bend-filter: custom parameters need {', '.join(missing)}")
        params = BendLossParams(radius=float(radius), length=float(length), **{k: float(v) for k, v in rest.items()})
    else:
        params = default_bend_params(float(radius), float(length))
    return synth_bend_filter(params, grid, id)


# name -> builder(grid, id, **params)
SYNTH_MODELS = {
    "attenuator": lambda grid, id, **p: synth_attenuator(grid=grid, id=id, **p),
    "isolator": lambda grid, id, **p: synth_isolator(grid=grid, id=id, **p),
    "wdm": lambda grid, id, **p: synth_wdm(grid=grid, id=id, **p),
    "bend-filter": _bend_from_params,
}


def synthesize(model: str, params: Mapping[str, object], grid: WavelengthGrid | None = None, id: str | None = None) -> Component:
    """Build a synthetic component by model name."""
    try:
        builder = SYNTH_MODELS[model]
    except KeyError:
        raise ComponentError(f"unknown model {model!r}; known: {', '.join(sorted(SYNTH_MODELS))}") from None
    try:
        return builder(grid or default_grid(), id or model, **dict(params))
    except TypeError as exc:
        raise ComponentError(f"{model}: bad parameters ({exc})") from None


# --- manifests ----------------------------------------------------------------


def component_from_manifest(obj: Mapping, base_dir: Path, grid: WavelengthGrid | None = None) -> Component:
    """Build a component from a parsed manifest dict.

    Measured form::

        {"id": "VOA", "kind": "two-port",
         "legs": {"forward": "voa_f.csv", "backward": "voa_b.csv"}}
        {"id": "PBS1", "kind": "three-port", "legs": {"pairs": {"12": "...", ...}}}

    Synthetic form::

        {"id": "ISO", "kind": "two-port", "model": {"name": "isolator", "params": {...}}}

    Relative paths resolve against ``base_dir``.
    """
    if not isinstance(obj, Mapping):
        raise ComponentError("component manifest must be a JSON object")
    cid = obj.get("id")
    if not isinstance(cid, str) or not cid:
        raise ComponentError("component manifest needs a non-empty string 'id'")
    kind = obj.get("kind", TWO_PORT)
    if "model" in obj:
        model = obj["model"]
        if not isinstance(model, Mapping) or "name" not in model:
            raise ComponentError(f"{cid}: 'model' needs a 'name'")
        comp = synthesize(model["name"], model.get("params", {}), grid, cid)
        if comp.kind != kind:
            raise ComponentError(f"{cid}: model {model['name']} builds a {comp.kind} component, manifest says {kind}")
        return comp
    legs = obj.get("legs")
    if not isinstance(legs, Mapping):
        raise ComponentError(f"{cid}: manifest needs 'legs' or 'model'")
    allow_gain = bool(obj.get("gain_allowed", False))

    def _p(v):
        return (Path(base_dir) / v) if v is not None else None

    if "pairs" in legs:
        comp = load_component(
            cid, kind, pairs={k: _p(v) for k, v in legs["pairs"].items()}, grid=grid, allow_gain=allow_gain
        )
    else:
        comp = load_component(
            cid, kind, forward=_p(legs.get("forward")), backward=_p(legs.get("backward")),
            grid=grid, allow_gain=allow_gain,
        )
    prov = Provenance.from_json(obj.get("provenance"))
    return Component(comp.id, comp.kind, comp.spectra, prov)


def read_json(path) -> object:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ComponentError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ComponentError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None


def load_component_manifest(path, grid: WavelengthGrid | None = None) -> Component:
    path = Path(path)
    try:
        return component_from_manifest(read_json(path), path.parent, grid)
    except (ComponentError, SpectrumError) as exc:
        msg = str(exc)
        raise ComponentError(msg if str(path) in msg else f"{path}: {msg}") from None


def load_catalog(path, grid: WavelengthGrid | None = None) -> dict[str, Component]:
    """Load a component catalog.

    The file is either a single component manifest or
    ``{"components": [<manifest path or inline manifest>, ...]}``.
    """
    path = Path(path)
    obj = read_json(path)
    entries = obj.get("components") if isinstance(obj, Mapping) and "components" in obj else [obj]
    if not isinstance(entries, list):
        raise ComponentError(f"{path}: 'components' must be a list")
    catalog: dict[str, Component] = {}
    for entry in entries:
        if isinstance(entry, str):
            comp = load_component_manifest(path.parent / entry, grid)
        else:
            try:
                comp = component_from_manifest(entry, path.parent, grid)
            except (ComponentError, SpectrumError) as exc:
                raise ComponentError(f"{path}: {exc}") from None
        if comp.id in catalog:
            raise ComponentError(f"{path}: duplicate component id {comp.id!r}")
        catalog[comp.id] = comp
    return catalog
