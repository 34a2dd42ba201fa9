"""Probe paths through a module and their double-pass transmittance.

A probe path is the route of Eve's light from the channel up to the
dominant reflection point and back out again. Its composite transmittance
is the dB sum of every traversed leg plus the reflection term. Only a
single reflection point is modelled; weaker reflections are ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from .components import (
    Component,
    ComponentError,
    TWO_PORT,
    load_catalog,
    parse_leg,
    read_json,
    reverse_leg,
)
from .spectrum import SpectrumError, TransmittanceSpectrum, WavelengthGrid, resample, sum_db

# Upper edge of the -(40..50) dB photodiode noise floor used to overestimate
# the modulator rear-facet reflectance; the edge most favourable to Eve.
DEFAULT_REF_DB = -40.0


class SchemeError(ValueError):
    pass


@dataclass(frozen=True)
class SchemeElement:
    component_id: str
    leg: str

    def __post_init__(self):
        object.__setattr__(self, "leg", parse_leg(self.leg))

    def reversed(self) -> "SchemeElement":
        return SchemeElement(self.component_id, reverse_leg(self.leg))

    def label(self) -> str:
        if self.leg in ("forward", "backward"):
            return f"{self.component_id}.{self.leg[0]}"
        return f"{self.component_id}.{self.leg}"


@dataclass(frozen=True)
class ReflectionPoint:
    ref_db: float = DEFAULT_REF_DB

    def __post_init__(self):
        if not math.isfinite(self.ref_db) or self.ref_db > 0:
            raise SchemeError(f"reflectance must be finite and <= 0 dB, got {self.ref_db}")


@dataclass(frozen=True)
class ProbePath:
    """Outbound legs, one reflection, inbound legs.

    The reflection is either a flat :class:`ReflectionPoint` or a full
    spectrum taken from a component leg, as when a PBS port-to-port
    leakage closes a loop back to the channel.
    """

    outbound: tuple[SchemeElement, ...]
    reflection: ReflectionPoint | SchemeElement
    inbound: tuple[SchemeElement, ...]

    def __post_init__(self):
        object.__setattr__(self, "outbound", tuple(self.outbound))
        object.__setattr__(self, "inbound", tuple(self.inbound))

    @property
    def warnings(self) -> list[str]:
        out = []
        if not self.outbound:
            out.append("probe path has an empty outbound pass")
        if not self.inbound:
            out.append("probe path has an empty inbound pass")
        return out

    def elements(self) -> list[SchemeElement]:
        refl = [self.reflection] if isinstance(self.reflection, SchemeElement) else []
        return [*self.outbound, *refl, *self.inbound]

    def describe(self) -> str:
        refl = (
            self.reflection.label()
            if isinstance(self.reflection, SchemeElement)
            else f"Ref({self.reflection.ref_db:g} dB)"
        )
        return " + ".join([e.label() for e in self.outbound] + [refl] + [e.label() for e in self.inbound])


@dataclass(frozen=True)
class Scheme:
    name: str
    path: ProbePath
    catalog: Mapping[str, Component] = field(default_factory=dict)

    def __post_init__(self):
        missing = sorted({e.component_id for e in self.path.elements()} - set(self.catalog))
        if missing:
            raise SchemeError(f"scheme {self.name!r}: unknown component(s) {', '.join(missing)}")
        for e in self.path.elements():
            comp = self.catalog[e.component_id]
            if not comp.has_leg(e.leg):
                raise SchemeError(f"scheme {self.name!r}: {e.component_id} has no {e.leg} leg")


def build_double_pass(
    outbound: Sequence[SchemeElement],
    reflection: float | ReflectionPoint | SchemeElement = DEFAULT_REF_DB,
    catalog: Mapping[str, Component] | None = None,
    overrides: Mapping[int, SchemeElement] | None = None,
) -> ProbePath:
    """Mirror an outbound pass into a full probe path.

    The inbound pass is the outbound list reversed with every leg flipped
    (forward <-> backward, ``ij`` <-> ``ji``). ``overrides`` maps an
    outbound index to the element that replaces its mirror image, for
    paths that do not retrace themselves.
    """
    overrides = dict(overrides or {})
    for idx in overrides:
        if not 0 <= idx < len(outbound):
            raise SchemeError(f"override index {idx} outside outbound pass of length {len(outbound)}")
    if not isinstance(reflection, (ReflectionPoint, SchemeElement)):
        reflection = ReflectionPoint(float(reflection))
    inbound = []
    for idx in reversed(range(len(outbound))):
        back = overrides.get(idx, outbound[idx].reversed())
        if catalog is not None:
            comp = catalog.get(back.component_id)
            if comp is None:
                raise SchemeError(f"unknown component {back.component_id!r}")
            if not comp.has_leg(back.leg):
                raise SchemeError(f"{back.component_id}: reverse leg {back.leg} spectrum missing")
        inbound.append(back)
    return ProbePath(tuple(outbound), reflection, tuple(inbound))


def _leg_on(scheme: Scheme, e: SchemeElement, grid: WavelengthGrid) -> TransmittanceSpectrum:
    comp = scheme.catalog[e.component_id]
    try:
        return resample(comp.leg(e.leg), grid)
    except (SpectrumError, ComponentError) as exc:
        raise SchemeError(f"component {e.component_id} ({e.leg}): {exc}") from None


def composite_transmittance(scheme: Scheme, grid: WavelengthGrid) -> TransmittanceSpectrum:
    """Total double-pass transmittance of the probe path on ``grid``."""
    path = scheme.path
    terms = [_leg_on(scheme, e, grid) for e in path.outbound]
    if isinstance(path.reflection, SchemeElement):
        terms.append(_leg_on(scheme, path.reflection, grid))
    else:
        terms.append(TransmittanceSpectrum.flat(grid, path.reflection.ref_db))
    terms.extend(_leg_on(scheme, e, grid) for e in path.inbound)
    return sum_db(terms, grid)


def one_pass_transmittance(scheme: Scheme, grid: WavelengthGrid, inbound: bool = False) -> TransmittanceSpectrum:
    legs = scheme.path.inbound if inbound else scheme.path.outbound
    return sum_db([_leg_on(scheme, e, grid) for e in legs], grid)


def apply_countermeasure(scheme: Scheme, component: Component, position: int = 0) -> Scheme:
    """Return a new scheme with a two-port element added to both passes.

    The forward leg goes in at ``position`` of the outbound pass (0 is the
    channel-facing end) and the backward leg at the mirrored inbound slot.
    """
    if component.kind != TWO_PORT:
        raise SchemeError(f"countermeasure {component.id} must be a two-port component")
    out = list(scheme.path.outbound)
    if not 0 <= position <= len(out):
        raise SchemeError(f"insertion position {position} out of range 0..{len(out)}")
    existing = scheme.catalog.get(component.id)
    if existing is not None and existing is not component:
        raise SchemeError(f"component id {component.id!r} already used by a different element")
    inbound = list(scheme.path.inbound)
    out.insert(position, SchemeElement(component.id, "forward"))
    inbound.insert(max(0, len(inbound) - position), SchemeElement(component.id, "backward"))
    catalog = {**scheme.catalog, component.id: component}
    return Scheme(scheme.name, replace(scheme.path, outbound=tuple(out), inbound=tuple(inbound)), catalog)


# --- JSON ---------------------------------------------------------------------


def _element(obj, where) -> SchemeElement:
    if not isinstance(obj, Mapping) or "component" not in obj or "leg" not in obj:
        raise SchemeError(f"{where}: elements need 'component' and 'leg'")
    try:
        return SchemeElement(str(obj["component"]), obj["leg"])
    except ComponentError as exc:
        raise SchemeError(f"{where}: {exc}") from None


def scheme_from_json(
    obj: Mapping,
    catalog: Mapping[str, Component],
    ref_db: float | None = None,
) -> Scheme:
    """Parse a scheme definition.

    ``{"name", "outbound": [{"component", "leg"}, ...],
    "reflection": {"flat_db": x} | {"component", "leg"},
    "inbound": [...] | "mirror", "overrides": [{"index", "component", "leg"}]}``

    ``ref_db`` replaces a flat reflection value when given.
    """
    if not isinstance(obj, Mapping):
        raise SchemeError("scheme must be a JSON object")
    name = obj.get("name")
    if not isinstance(name, str) or not name:
        raise SchemeError("scheme needs a non-empty 'name'")
    outbound = [_element(e, f"{name}.outbound[{i}]") for i, e in enumerate(obj.get("outbound", []))]
    refl_obj = obj.get("reflection", {"flat_db": DEFAULT_REF_DB})
    if isinstance(refl_obj, Mapping) and "component" in refl_obj:
        reflection = _element(refl_obj, f"{name}.reflection")
    elif isinstance(refl_obj, Mapping) and "flat_db" in refl_obj:
        reflection = ReflectionPoint(float(refl_obj["flat_db"]) if ref_db is None else float(ref_db))
    else:
        raise SchemeError(f"{name}.reflection must hold 'flat_db' or 'component'+'leg'")
    inbound = obj.get("inbound", "mirror")
    overrides = {}
    for i, o in enumerate(obj.get("overrides", [])):
        if not isinstance(o, Mapping) or "index" not in o:
            raise SchemeError(f"{name}.overrides[{i}] needs 'index'")
        overrides[int(o["index"])] = _element(o, f"{name}.overrides[{i}]")
    if inbound == "mirror":
        path = build_double_pass(outbound, reflection, catalog, overrides)
    else:
        if overrides:
            raise SchemeError(f"{name}: overrides only apply to a mirrored inbound pass")
        if not isinstance(inbound, list):
            raise SchemeError(f"{name}.inbound must be a list or \"mirror\"")
        path = ProbePath(outbound, reflection, [_element(e, f"{name}.inbound[{i}]") for i, e in enumerate(inbound)])
    return Scheme(name, path, dict(catalog))


def load_scheme(
    path,
    catalog: Mapping[str, Component] | None = None,
    grid: WavelengthGrid | None = None,
    ref_db: float | None = None,
) -> Scheme:
    """Load a scheme JSON file.

    A ``"catalog"`` key in the file names a component catalog relative to
    the scheme; components passed in ``catalog`` take precedence.
    """
    path = Path(path)
    try:
        obj = read_json(path)
        merged: dict[str, Component] = {}
        if isinstance(obj, Mapping) and "catalog" in obj:
            cat_ref = obj["catalog"]
            for ref in [cat_ref] if isinstance(cat_ref, str) else list(cat_ref):
                merged.update(load_catalog(path.parent / ref, grid))
        merged.update(catalog or {})
        return scheme_from_json(obj, merged, ref_db)
    except (SchemeError, ComponentError, SpectrumError) as exc:
        msg = str(exc)
        raise SchemeError(msg if str(path) in msg else f"{path}: {msg}") from None
