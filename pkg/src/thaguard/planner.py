"""Countermeasure stack search.

Finds the smallest multiset of passive two-port elements which, inserted at
the channel-facing end of a probe path, keeps chi below tolerance at every
wavelength while the added forward loss at the operating wavelength stays
within budget.

Small catalogs are enumerated exhaustively; large ones fall back to a
greedy heuristic with no optimality guarantee.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .components import TWO_PORT, Component, ComponentError, component_from_manifest, load_component_manifest, read_json
from .scheme import Scheme, apply_countermeasure, composite_transmittance
from .security import ProbeBudget, SecurityThresholds, evaluate, holevo_two_state, mean_photon_number
from .spectrum import SpectrumError, WavelengthGrid, default_grid, resample

EXHAUSTIVE_LIMIT = 10_000


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class CatalogEntry:
    component: Component
    max_count: int = 1
    operating_loss_db: float | None = None

    def __post_init__(self):
        if self.component.kind != TWO_PORT:
            raise PlanError(f"countermeasure {self.component.id} must be two-port")
        if int(self.max_count) != self.max_count or self.max_count < 0:
            raise PlanError(f"{self.component.id}: max_count must be a non-negative integer")

    @property
    def id(self) -> str:
        return self.component.id

    def loss_at(self, lambda_op: float) -> float:
        """Forward single-pass insertion loss (dB, positive) at ``lambda_op``."""
        if self.operating_loss_db is not None:
            return float(self.operating_loss_db)
        try:
            return -self.component.forward.at(lambda_op)
        except SpectrumError as exc:
            raise PlanError(f"{self.id}: {exc}") from None


@dataclass(frozen=True)
class PlanConstraints:
    chi_max: float = 1e-2
    lambda_op: float = 1550.0
    op_loss_budget_db: float = 6.0

    def __post_init__(self):
        if not 0 < self.chi_max < 1:
            raise PlanError("chi_max must be in (0, 1)")
        if not (math.isfinite(self.op_loss_budget_db) and self.op_loss_budget_db >= 0):
            raise PlanError("operating loss budget must be >= 0 dB")


@dataclass(frozen=True)
class Plan:
    picks: Mapping[str, int]
    achieved_worst_chi: float
    achieved_operating_loss_db: float
    feasible: bool = True
    strategy: str = "given"
    worst_wavelength_nm: float | None = None
    evaluated: int = 0

    @property
    def total(self) -> int:
        return sum(self.picks.values())

    def to_json(self) -> dict:
        return {
            "feasible": self.feasible,
            "strategy": self.strategy,
            "picks": dict(sorted((k, v) for k, v in self.picks.items() if v)),
            "pick_count": self.total,
            "achieved_worst_chi": self.achieved_worst_chi,
            "achieved_operating_loss_db": self.achieved_operating_loss_db,
            "worst_wavelength_nm": self.worst_wavelength_nm,
            "evaluated_plans": self.evaluated,
        }


def apply_picks(scheme: Scheme, picks: Mapping[str, int], components: Mapping[str, Component]) -> Scheme:
    out = scheme
    for cid in sorted(picks):
        if cid not in components:
            raise PlanError(f"plan references unknown component {cid!r}")
        for _ in range(int(picks[cid])):
            out = apply_countermeasure(out, components[cid], 0)
    return out


def verify_plan(
    picks: Mapping[str, int] | Plan,
    scheme: Scheme,
    components: Mapping[str, Component] | Sequence[CatalogEntry],
    budget: ProbeBudget = ProbeBudget(),
    constraints: PlanConstraints = PlanConstraints(),
    grid: WavelengthGrid | None = None,
) -> dict:
    """Insert every pick, evaluate, and report pass/fail per constraint."""
    grid = grid or default_grid()
    if isinstance(picks, Plan):
        picks = picks.picks
    op_losses: dict[str, float] = {}
    if not isinstance(components, Mapping):
        op_losses = {e.id: e.loss_at(constraints.lambda_op) for e in components}
        components = {e.id: e.component for e in components}
    protected = apply_picks(scheme, picks, components)
    curve = evaluate(
        composite_transmittance(protected, grid),
        budget,
        SecurityThresholds(chi_max=constraints.chi_max),
    )
    op_loss = 0.0
    for cid, n in picks.items():
        loss = op_losses.get(cid)
        if loss is None:
            loss = CatalogEntry(components[cid]).loss_at(constraints.lambda_op)
        op_loss += n * loss
    chi_ok = curve.worst_chi <= constraints.chi_max
    loss_ok = op_loss <= constraints.op_loss_budget_db + 1e-12
    worst = curve.worst_point()
    return {
        "pass": chi_ok and loss_ok,
        "picks": dict(sorted(picks.items())),
        "chi": {
            "pass": chi_ok,
            "worst_chi": curve.worst_chi,
            "chi_max": constraints.chi_max,
            "worst_wavelength_nm": worst["wavelength_nm"],
            "worst_t_db": worst["t_db"],
            "loopholes": [{"lo_nm": lo, "hi_nm": hi} for lo, hi in curve.loopholes],
        },
        "operating_loss": {
            "pass": loss_ok,
            "value_db": op_loss,
            "budget_db": constraints.op_loss_budget_db,
            "lambda_op_nm": constraints.lambda_op,
        },
        "path": protected.path.describe(),
    }


class _Evaluator:
    """Scores count vectors with the additive dB shortcut.

    Each countermeasure contributes forward + backward legs to the composite
    irrespective of where it is inserted, so a plan's composite is the base
    composite plus a weighted sum of per-entry double-pass deltas.
    """

    def __init__(self, entries, scheme, budget, constraints, grid):
        self.entries = entries
        self.constraints = constraints
        self.grid = grid
        self.base = composite_transmittance(scheme, grid).values_db
        try:
            self.deltas = np.array(
                [resample(e.component.forward, grid).values_db + resample(e.component.backward, grid).values_db
                 for e in entries]
            ).reshape(len(entries), len(grid))
        except SpectrumError as exc:
            raise PlanError(str(exc)) from None
        self.losses = np.array([e.loss_at(constraints.lambda_op) for e in entries])
        self.budget = budget
        self.calls = 0

    def score(self, counts):
        """(max mu_p, worst chi, op loss, worst wavelength) for a count vector."""
        self.calls += 1
        c = np.asarray(counts, dtype=float)
        t = self.base + c @ self.deltas if len(c) else self.base
        mu = mean_photon_number(t, self.grid.points, self.budget)
        i = int(np.argmax(mu))
        return float(mu[i]), float(holevo_two_state(mu[i])), float(c @ self.losses) if len(c) else 0.0, float(self.grid.points[i])

    def feasible(self, chi, loss) -> bool:
        return chi <= self.constraints.chi_max and loss <= self.constraints.op_loss_budget_db + 1e-12

    def plan(self, counts, strategy, feasible=None) -> Plan:
        _, chi, loss, wl = self.score(counts)
        picks = {e.id: int(n) for e, n in zip(self.entries, counts) if n}
        if feasible is None:
            feasible = self.feasible(chi, loss)
        return Plan(picks, chi, loss, feasible, strategy, wl, self.calls)


def _tie_key(entries, counts, loss):
    ids = tuple(itertools.chain.from_iterable([e.id] * int(n) for e, n in sorted(zip(entries, counts), key=lambda p: p[0].id)))
    return (int(sum(counts)), loss, ids)


def search_exhaustive(ev: _Evaluator) -> Plan:
    entries = ev.entries
    best = None
    best_infeasible = None
    for counts in itertools.product(*(range(e.max_count + 1) for e in entries)):
        mu, chi, loss, _ = ev.score(counts)
        if ev.feasible(chi, loss):
            key = _tie_key(entries, counts, loss)
            if best is None or key < best[0]:
                best = (key, counts)
        elif loss <= ev.constraints.op_loss_budget_db + 1e-12:
            key = (mu, *_tie_key(entries, counts, loss))
            if best_infeasible is None or key < best_infeasible[0]:
                best_infeasible = (key, counts)
    if best is not None:
        return ev.plan(best[1], "exhaustive")
    counts = best_infeasible[1] if best_infeasible else (0,) * len(entries)
    return ev.plan(counts, "exhaustive", feasible=False)


def search_greedy(ev: _Evaluator) -> Plan:
    """Add whichever pick lowers the band-worst mu_p most until feasible.

    chi saturates near 1 for leaky paths, so the marginal gain is ranked
    on the worst-case mean photon number, which orders plans identically
    to worst-case chi but keeps resolving differences.
    """
    entries = ev.entries
    counts = [0] * len(entries)
    mu, chi, loss, _ = ev.score(counts)
    while not ev.feasible(chi, loss):
        options = []
        for k, e in enumerate(entries):
            if counts[k] >= e.max_count:
                continue
            trial = counts.copy()
            trial[k] += 1
            t_mu, t_chi, t_loss, _ = ev.score(trial)
            if t_loss > ev.constraints.op_loss_budget_db + 1e-12:
                continue
            options.append(((t_mu, t_loss, e.id), k, t_mu, t_chi, t_loss))
        if not options:
            return ev.plan(counts, "greedy", feasible=False)
        _, k, mu, chi, loss = min(options)
        counts[k] += 1
    return ev.plan(counts, "greedy")


def search_min_stack(
    catalog: Sequence[CatalogEntry],
    scheme: Scheme,
    budget: ProbeBudget = ProbeBudget(),
    constraints: PlanConstraints = PlanConstraints(),
    grid: WavelengthGrid | None = None,
    strategy: str = "auto",
) -> Plan:
    """Smallest feasible stack, ties broken by operating loss then ids.

    ``strategy`` is ``"auto"`` (exhaustive when the plan space has at most
    10**4 members, greedy otherwise), ``"exhaustive"`` or ``"greedy"``.
    Infeasible searches return ``feasible=False`` with the best plan found.
    """
    grid = grid or default_grid()
    entries = sorted(catalog, key=lambda e: e.id)
    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        raise PlanError("duplicate component ids in countermeasure catalog")
    ev = _Evaluator(entries, scheme, budget, constraints, grid)
    if strategy == "auto":
        space = math.prod(e.max_count + 1 for e in entries)
        strategy = "exhaustive" if space <= EXHAUSTIVE_LIMIT else "greedy"
    if strategy == "exhaustive":
        return search_exhaustive(ev)
    if strategy == "greedy":
        return search_greedy(ev)
    raise PlanError(f"unknown strategy {strategy!r}")


def load_countermeasures(path, grid: WavelengthGrid | None = None) -> list[CatalogEntry]:
    """Load ``{"entries": [{"component": <manifest path | inline>, "max_count": n,
    "operating_loss_db": x?}, ...]}``."""
    path = Path(path)
    try:
        obj = read_json(path)
        raw = obj.get("entries") if isinstance(obj, Mapping) else None
        if not isinstance(raw, list):
            raise PlanError("countermeasure catalog needs an 'entries' list")
        entries = []
        for i, item in enumerate(raw):
            if not isinstance(item, Mapping) or "component" not in item:
                raise PlanError(f"entries[{i}] needs 'component'")
            ref = item["component"]
            if isinstance(ref, str):
                comp = load_component_manifest(path.parent / ref, grid)
            else:
                comp = component_from_manifest(ref, path.parent, grid)
            entries.append(CatalogEntry(comp, int(item.get("max_count", 1)), item.get("operating_loss_db")))
        return entries
    except (PlanError, ComponentError, SpectrumError) as exc:
        msg = str(exc)
        raise PlanError(msg if str(path) in msg else f"{path}: {msg}") from None
