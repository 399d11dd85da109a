"""Fleet inventories, convoy assembly, ADR planning and recovery.

The modular fleet is a pool of chassis plus weapon and cargo modules; a vehicle
is a chassis with up to ``slots`` payload modules mounted. The conventional
fleet has fixed-type vehicles. Damaged items are repaired in a queue, each
taking ``RECOVERY_HOURS`` of crew time.
"""
from __future__ import annotations

import copy
import math
from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .._validation import N_STRATEGIES, check_strategy_index
from ..errors import DomainError, InfeasiblePlanError, UnsupportedOperationError
from ..strategies import ATTACK_STRATEGIES, DEFENSE_STRATEGIES
from .records import ATTACKER, DEFENDER, ROLES

ASSEMBLY_HOURS = 1.0
DISASSEMBLY_HOURS = 0.5
RECOVERY_HOURS = 10.0

WEAPON, CARGO, CHASSIS = "weapon", "cargo", "chassis"
READY, IN_PROCESS, RECOVERING = "ready", "in_process", "recovering"
DISPATCHED, DAMAGED = "dispatched", "damaged"
MODULAR, CONVENTIONAL = "modular", "conventional"


@dataclass
class ModuleUnit:
    id: str
    kind: str
    firepower: float = 0.0
    capacity: float = 0.0
    status: str = READY
    recovery_remaining: float = 0.0
    queue_seq: int = 0

    def __post_init__(self):
        if self.kind == WEAPON and self.capacity != 0:
            raise DomainError("weapon modules carry no capacity")
        if self.kind == CARGO and self.firepower != 0:
            raise DomainError("cargo modules carry no firepower")
        if self.kind == CHASSIS and (self.firepower or self.capacity):
            raise DomainError("a chassis contributes no attributes")


@dataclass
class Vehicle:
    """A dispatchable unit.

    Modular vehicles carry a ``chassis`` and mounted ``modules`` and derive their
    attributes from them; conventional vehicles use ``type_tag`` and fixed
    base attributes.
    """

    id: str
    base_firepower: float = 0.0
    base_capacity: float = 0.0
    type_tag: str | None = None
    chassis: ModuleUnit | None = None
    modules: list[ModuleUnit] = field(default_factory=list)
    status: str = READY
    recovery_remaining: float = 0.0
    queue_seq: int = 0

    @property
    def is_modular(self) -> bool:
        return self.chassis is not None

    @property
    def firepower(self) -> float:
        if self.is_modular:
            return float(sum(m.firepower for m in self.modules))
        return self.base_firepower

    @property
    def capacity(self) -> float:
        if self.is_modular:
            return float(sum(m.capacity for m in self.modules))
        return self.base_capacity

    @property
    def composition(self) -> tuple[str, ...]:
        return tuple(sorted(m.kind for m in self.modules))


@dataclass
class FleetState:
    fleet_kind: str
    vehicles: list[Vehicle]
    spare_modules: list[ModuleUnit] = field(default_factory=list)
    clock: float = 0.0
    slots: int = 2
    next_seq: int = 0

    def vehicle(self, vid: str) -> Vehicle:
        for v in self.vehicles:
            if v.id == vid:
                return v
        raise KeyError(vid)

    def ready_vehicles(self) -> list[Vehicle]:
        return [v for v in self.vehicles if v.status == READY]

    def module_census(self) -> Counter:
        """Count of every module kind, wherever it currently is."""
        census: Counter = Counter()
        for v in self.vehicles:
            if v.chassis is not None:
                census[CHASSIS] += 1
            census.update(m.kind for m in v.modules)
        census.update(m.kind for m in self.spare_modules)
        return census

    def composition_census(self) -> Counter:
        """Multiset of compositions over ready vehicles (the ADR target format)."""
        return Counter(v.composition for v in self.ready_vehicles())


@dataclass(frozen=True)
class Demand:
    firepower_req: float
    capacity_req: float

    def __post_init__(self):
        for name in ("firepower_req", "capacity_req"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")


@dataclass
class Convoy:
    vehicles: list[Vehicle] = field(default_factory=list)

    @property
    def total_firepower(self) -> float:
        return float(sum(v.firepower for v in self.vehicles))

    @property
    def total_capacity(self) -> float:
        return float(sum(v.capacity for v in self.vehicles))

    def safety(self, demand: Demand) -> tuple[float, float]:
        return (
            self.total_firepower / demand.firepower_req,
            self.total_capacity / demand.capacity_req,
        )


def conventional_fleet(
    n_gun_trucks: int = 8,
    n_transports: int = 8,
    gun_firepower: float = 2.0,
    transport_capacity: float = 2.0,
) -> FleetState:
    vehicles = [
        Vehicle(f"G{k:02d}", base_firepower=gun_firepower, type_tag="gun_truck")
        for k in range(n_gun_trucks)
    ]
    vehicles += [
        Vehicle(f"T{k:02d}", base_capacity=transport_capacity, type_tag="transport")
        for k in range(n_transports)
    ]
    return FleetState(CONVENTIONAL, vehicles)


def modular_fleet(
    n_chassis: int = 8,
    n_weapon: int = 8,
    n_cargo: int = 8,
    weapon_firepower: float = 2.0,
    cargo_capacity: float = 2.0,
    slots: int = 2,
) -> FleetState:
    """Build a modular fleet with modules mounted round-robin (weapon then cargo)."""
    vehicles = [
        Vehicle(f"M{k:02d}", chassis=ModuleUnit(f"C{k:02d}", CHASSIS)) for k in range(n_chassis)
    ]
    pool = [ModuleUnit(f"W{k:02d}", WEAPON, firepower=weapon_firepower) for k in range(n_weapon)]
    pool += [ModuleUnit(f"K{k:02d}", CARGO, capacity=cargo_capacity) for k in range(n_cargo)]
    spare = []
    for k, module in enumerate(pool):
        if vehicles and len(vehicles[k % len(vehicles)].modules) < slots:
            vehicles[k % len(vehicles)].modules.append(module)
        else:
            spare.append(module)
    return FleetState(MODULAR, vehicles, spare, slots=slots)


# ---------------------------------------------------------------------------
# Convoy assembly


def _check_role(role: str) -> str:
    if role not in ROLES:
        raise DomainError(f"role must be one of {ROLES}, got {role!r}")
    return role


def _type_key(attrs, role: str) -> tuple[tuple[float, float, int], ...]:
    """Group (fp, cap) pairs into useful types, largest first."""
    counts: Counter = Counter()
    for fp, cap in attrs:
        if role == ATTACKER:
            cap = 0.0
            if fp <= 0:
                continue
        elif fp <= 0 and cap <= 0:
            continue
        counts[(fp, cap)] += 1
    keys = sorted(counts, key=lambda k: (k[0] + k[1], k[0], k[1]), reverse=True)
    return tuple((fp, cap, counts[(fp, cap)]) for fp, cap in keys)


def _vehicle_types(state: FleetState, role: str) -> list[tuple[float, float, list[Vehicle]]]:
    ready = sorted(state.ready_vehicles(), key=lambda v: v.id)
    key = _type_key([(v.firepower, v.capacity) for v in ready], role)
    out = []
    for fp, cap, _ in key:
        group = [v for v in ready
                 if v.firepower == fp and (role == ATTACKER or v.capacity == cap)]
        out.append((fp, cap, group))
    return out


@lru_cache(maxsize=4096)
def _convoy_table(key: tuple[tuple[float, float, int], ...]):
    """Every type-count vector ordered by (vehicle count asc, counts lexicographically desc)."""
    grids = np.meshgrid(*[np.arange(n + 1) for _, _, n in key], indexing="ij")
    counts = np.stack([g.ravel() for g in grids], axis=1) if key else np.zeros((1, 0), int)
    fp = counts @ np.array([k[0] for k in key], dtype=float)
    cap = counts @ np.array([k[1] for k in key], dtype=float)
    sort_keys = [-counts[:, t] for t in reversed(range(counts.shape[1]))] + [counts.sum(axis=1)]
    order = np.lexsort(sort_keys) if sort_keys else np.arange(len(counts))
    return counts[order], fp[order], cap[order]


def _band_arrays(role: str):
    if role == ATTACKER:
        fp = [(s.firepower_band.lo, s.firepower_band.hi) for s in ATTACK_STRATEGIES]
        cap = [(0.0, math.inf)] * N_STRATEGIES
    else:
        fp = [(s.firepower_band.lo, s.firepower_band.hi) for s in DEFENSE_STRATEGIES]
        cap = [(s.capacity_band.lo, s.capacity_band.hi) for s in DEFENSE_STRATEGIES]
    return np.array(fp), np.array(cap)


def _feasible_from_key(key, role: str, demand: Demand):
    counts, fp, cap = _convoy_table(key)
    fp_b, cap_b = _band_arrays(role)
    sf = fp[:, None] / demand.firepower_req
    sc = cap[:, None] / demand.capacity_req
    ok = (sf >= fp_b[:, 0]) & (sf < fp_b[:, 1])
    if role == DEFENDER:
        ok &= (sc >= cap_b[:, 0]) & (sc < cap_b[:, 1])
    return counts, ok


def _feasible_rows(state: FleetState, role: str, demand: Demand):
    types = _vehicle_types(state, role)
    key = tuple((fp, cap, len(vs)) for fp, cap, vs in types)
    counts, ok = _feasible_from_key(key, role, demand)
    return types, counts, ok


def _mask_from_ok(ok) -> int:
    mask = 1  # the give-up / token convoy is always possible
    for s in np.flatnonzero(ok.any(axis=0)):
        mask |= 1 << int(s)
    return mask


def assemble_convoy(state: FleetState, role: str, strategy_index: int, demand: Demand) -> Convoy | None:
    """Build a convoy whose safety levels fall in the strategy's band(s).

    Attackers are constrained on firepower only, defenders on both attributes.
    Among all feasible subsets of ready vehicles the one with the fewest
    vehicles is chosen; ties go to the subset using the most vehicles of the
    largest-attribute types. Returns ``None`` when no subset qualifies.
    """
    _check_role(role)
    s = check_strategy_index(strategy_index) - 1
    types, counts, ok = _feasible_rows(state, role, demand)
    hits = np.flatnonzero(ok[:, s])
    if hits.size == 0:
        return None
    chosen = counts[hits[0]]
    vehicles = []
    for (_, _, vs), n in zip(types, chosen):
        vehicles.extend(vs[:n])
    return Convoy(vehicles)


def availability_mask(state: FleetState, role: str, demand: Demand) -> int:
    """Bitmask (bit 0 = strategy 1) of strategies with a feasible convoy."""
    _check_role(role)
    _, _, ok = _feasible_rows(state, role, demand)
    return _mask_from_ok(ok)


# ---------------------------------------------------------------------------
# ADR planning


@dataclass(frozen=True)
class ADRAction:
    action: str  # "disassemble" | "assemble"
    vehicle_id: str
    module_kind: str

    @property
    def hours(self) -> float:
        return DISASSEMBLY_HOURS if self.action == "disassemble" else ASSEMBLY_HOURS


@dataclass(frozen=True)
class ReconfigurationPlan:
    actions: tuple[ADRAction, ...]
    assignment: tuple[tuple[str, tuple[str, ...]], ...]

    @property
    def total_downtime(self) -> float:
        return float(sum(a.hours for a in self.actions))


def _normalize_target(target) -> Counter:
    out: Counter = Counter()
    items = target.items() if isinstance(target, Mapping) else ((t, 1) for t in target)
    for comp, n in items:
        out[tuple(sorted(comp))] += n
    return out


def reconfigure_plan(state: FleetState, target) -> ReconfigurationPlan:
    """Plan disassembly/assembly actions turning ready vehicles into ``target``.

    ``target`` is a multiset of compositions (tuples of module kinds), one per
    ready vehicle. Vehicles already matching a target composition are left
    alone; the rest are matched greedily by module overlap. Disassemblies are
    listed before assemblies so freed modules can be reused.
    """
    if state.fleet_kind != MODULAR:
        raise UnsupportedOperationError("only the modular fleet can be reconfigured")
    target = _normalize_target(target)
    ready = sorted(state.ready_vehicles(), key=lambda v: v.id)
    if sum(target.values()) != len(ready):
        raise InfeasiblePlanError(
            f"target has {sum(target.values())} vehicles but {len(ready)} are ready"
        )
    if any(len(comp) > state.slots for comp in target):
        raise InfeasiblePlanError(f"a target composition exceeds {state.slots} slots")
    if any(kind not in (WEAPON, CARGO) for comp in target for kind in comp):
        raise InfeasiblePlanError("target compositions may only hold weapon/cargo modules")
    pool = Counter(m.kind for m in state.spare_modules if m.status == READY)
    for v in ready:
        pool.update(v.composition)
    needed: Counter = Counter()
    for comp, n in target.items():
        for kind in comp:
            needed[kind] += n
    if needed - pool:
        raise InfeasiblePlanError(f"module pool lacks {dict(needed - pool)}")

    remaining = Counter(target)
    assignment: dict[str, tuple[str, ...]] = {}
    for v in ready:
        if remaining[v.composition] > 0:
            remaining[v.composition] -= 1
            assignment[v.id] = v.composition
    free = [(k, v.id, v.composition) for k, v in enumerate(ready) if v.id not in assignment]
    for comp in sorted(remaining.elements(), reverse=True):
        want = Counter(comp)
        best = max(free, key=lambda f: (sum((Counter(f[2]) & want).values()), -f[0]))
        free.remove(best)
        assignment[best[1]] = comp

    disassemble, assemble = [], []
    for v in ready:
        cur, new = Counter(v.composition), Counter(assignment[v.id])
        disassemble += [ADRAction("disassemble", v.id, k) for k in sorted((cur - new).elements())]
        assemble += [ADRAction("assemble", v.id, k) for k in sorted((new - cur).elements())]
    return ReconfigurationPlan(
        tuple(disassemble + assemble), tuple(sorted(assignment.items()))
    )


def apply_plan(state: FleetState, plan: ReconfigurationPlan, budget_hours: float = math.inf) -> float:
    """Execute plan actions in order (in place) until the time budget runs out.

    Returns the hours spent. Module conservation holds after every action.
    """
    spent = 0.0
    for act in plan.actions:
        if spent + act.hours > budget_hours + 1e-12:
            break
        v = state.vehicle(act.vehicle_id)
        if act.action == "disassemble":
            module = next(m for m in v.modules if m.kind == act.module_kind)
            v.modules.remove(module)
            state.spare_modules.append(module)
        else:
            module = next(
                m for m in state.spare_modules if m.kind == act.module_kind and m.status == READY
            )
            state.spare_modules.remove(module)
            v.modules.append(module)
        spent += act.hours
    state.clock += spent
    return spent


def candidate_targets(state: FleetState) -> list[Counter]:
    """Compositions of the ready module pool over the ready chassis.

    Enumerates how many weapon+cargo mixed vehicles to build; the remaining
    modules are paired by kind, leftovers mounted singly.
    """
    ready = state.ready_vehicles()
    pool = Counter(m.kind for m in state.spare_modules if m.status == READY)
    for v in ready:
        pool.update(v.composition)
    w, c = pool[WEAPON], pool[CARGO]
    out = []
    for n_mixed in range(min(w, c) + 1):
        rest_w, rest_c = w - n_mixed, c - n_mixed
        comps = [(CARGO, WEAPON)] * n_mixed
        comps += [(WEAPON, WEAPON)] * (rest_w // 2) + [(CARGO, CARGO)] * (rest_c // 2)
        comps += [(WEAPON,)] * (rest_w % 2) + [(CARGO,)] * (rest_c % 2)
        if state.slots < 2:
            comps = [(WEAPON,)] * w + [(CARGO,)] * c
        comps = comps[: len(ready)]
        comps += [()] * (len(ready) - len(comps))
        target = Counter(comps)
        if target not in out:
            out.append(target)
    return out


def _unit_attributes(state: FleetState) -> dict[str, tuple[float, float]]:
    """Per-kind module attributes; the pool is assumed homogeneous within a kind."""
    unit: dict[str, tuple[float, float]] = {}
    modules = [m for v in state.vehicles for m in v.modules] + state.spare_modules
    for m in modules:
        attrs = unit.setdefault(m.kind, (m.firepower, m.capacity))
        if attrs != (m.firepower, m.capacity):
            raise UnsupportedOperationError("heterogeneous modules of one kind are not supported")
    return unit


def _composition_attrs(comp, unit) -> tuple[float, float]:
    return (float(sum(unit[k][0] for k in comp)), float(sum(unit[k][1] for k in comp)))


def plan_for_role(state: FleetState, role: str, demand: Demand, budget_hours: float) -> ReconfigurationPlan:
    """Base-agent choice: the reachable configuration with the most available strategies.

    Ties prefer less downtime, then fewer mixed vehicles.
    """
    unit = _unit_attributes(state)
    scored = []
    for target in [state.composition_census()] + candidate_targets(state):
        attrs = [_composition_attrs(comp, unit) for comp, n in target.items() for _ in range(n)]
        _, ok = _feasible_from_key(_type_key(attrs, role), role, demand)
        scored.append((bin(_mask_from_ok(ok)).count("1"), target))
    for avail in sorted({a for a, _ in scored}, reverse=True):
        plans = [reconfigure_plan(state, t) for a, t in scored if a == avail]
        plans = [p for p in plans if p.total_downtime <= budget_hours]
        if plans:
            return min(plans, key=lambda p: p.total_downtime)
    raise AssertionError("the current configuration is always within budget")  # pragma: no cover


# ---------------------------------------------------------------------------
# Damage and recovery


def mark_damaged(state: FleetState, vehicle_ids, rng: np.random.Generator | None = None) -> None:
    """Send damaged vehicles (in place) to the repair queue with full recovery time.

    A damaged modular vehicle is stripped. With ``rng`` one of its components
    (chassis or payload module, uniformly) is damaged and the others are
    salvaged as ready spares; without ``rng`` every component is damaged.
    """
    for vid in vehicle_ids:
        v = state.vehicle(vid)
        v.status = RECOVERING
        if v.is_modular:
            parts = [v.chassis, *v.modules]
            hit = parts if rng is None else [parts[int(rng.integers(len(parts)))]]
            if v.chassis not in hit:
                v.status = READY
            for item in hit:
                item.status = RECOVERING
                item.recovery_remaining = RECOVERY_HOURS
                item.queue_seq = state.next_seq
                state.next_seq += 1
            state.spare_modules.extend(v.modules)
            v.modules = []
        else:
            v.recovery_remaining = RECOVERY_HOURS
            v.queue_seq = state.next_seq
            state.next_seq += 1


def _recovery_queue(state: FleetState) -> list:
    if state.fleet_kind == MODULAR:
        items = [v.chassis for v in state.vehicles if v.status == RECOVERING]
        items += [m for m in state.spare_modules if m.status == RECOVERING]
    else:
        items = [v for v in state.vehicles if v.status == RECOVERING]
    return sorted(items, key=lambda it: it.queue_seq)


def advance_recovery(state: FleetState, dt: float, crews: int | None = None) -> None:
    """In-place variant of :func:`step_recovery`."""
    if dt < 0:
        raise DomainError("dt must be >= 0")
    queue = _recovery_queue(state)
    if crews is None:
        for it in queue:
            it.recovery_remaining = max(0.0, it.recovery_remaining - dt)
    else:
        left = dt
        while left > 0 and queue:
            active = queue[:crews]
            step = min(left, min(it.recovery_remaining for it in active))
            for it in active:
                it.recovery_remaining -= step
            left -= step
            queue = [it for it in queue if it.recovery_remaining > 1e-12]
            for it in active:
                if it.recovery_remaining <= 1e-12:
                    it.recovery_remaining = 0.0
    for it in _recovery_queue(state):
        if it.recovery_remaining <= 1e-12:
            it.recovery_remaining = 0.0
            it.status = READY
    if state.fleet_kind == MODULAR:
        for v in state.vehicles:
            if v.status == RECOVERING and v.chassis.status == READY:
                v.status = READY
    state.clock += dt


def step_recovery(state: FleetState, dt: float, crews: int | None = None) -> FleetState:
    """Return a copy of ``state`` with ``dt`` hours of repair applied.

    With ``crews=None`` every queued item progresses at once; otherwise at most
    ``crews`` items are worked on simultaneously, in queue order.
    """
    new = copy.deepcopy(state)
    advance_recovery(new, dt, crews)
    return new
