"""Campaign configuration and the engagement loop."""
from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import ConfigError
from .agents import RunningPayoffs, infer_adversary, select_strategy
from .combat import _check_range, generate_demand, resolve_confrontation
from .fleet import (
    CONVENTIONAL,
    DISPATCHED,
    MODULAR,
    READY,
    FleetState,
    advance_recovery,
    apply_plan,
    assemble_convoy,
    availability_mask,
    conventional_fleet,
    mark_damaged,
    modular_fleet,
    plan_for_role,
)
from .records import (
    ATTACKER,
    DEFENDER,
    INTELLIGENT,
    STOCHASTIC,
    BattleRecord,
    other_role,
)


def _opt(section: str, **kw):
    return field(metadata={"section": section}, **kw)


@dataclass
class SimulationConfig:
    engagements: int = _opt("campaign", default=200)
    stochastic_fraction: float = _opt("campaign", default=0.3)
    gap_hours: float = _opt("campaign", default=24.0)
    repair_crews: int = _opt("campaign", default=2)
    adr_budget_hours: float = _opt("campaign", default=24.0)
    role_schedule: str = _opt("campaign", default="")
    inference_window: int = _opt("policy", default=20)
    demand_firepower: tuple = _opt("demand", default=(4.0, 6.0))
    demand_capacity: tuple = _opt("demand", default=(4.0, 6.0))
    n_gun_trucks: int = _opt("conventional", default=8)
    n_transports: int = _opt("conventional", default=8)
    gun_firepower: float = _opt("conventional", default=2.0)
    transport_capacity: float = _opt("conventional", default=2.0)
    n_chassis: int = _opt("modular", default=8)
    n_weapon: int = _opt("modular", default=8)
    n_cargo: int = _opt("modular", default=8)
    weapon_firepower: float = _opt("modular", default=2.0)
    cargo_capacity: float = _opt("modular", default=2.0)
    slots: int = _opt("modular", default=2)
    damage_scale: float = _opt("damage", default=0.3)
    damage_cap: float = _opt("damage", default=0.9)
    damage_eps: float = _opt("damage", default=1e-6)

    def validate(self) -> SimulationConfig:
        if self.engagements < 0:
            raise ConfigError("engagements must be >= 0")
        if not 0.0 <= self.stochastic_fraction <= 1.0:
            raise ConfigError("stochastic_fraction must lie in [0, 1]")
        if not (math.isfinite(self.gap_hours) and self.gap_hours >= 0):
            raise ConfigError("gap_hours must be finite and >= 0")
        if self.repair_crews < 0:
            raise ConfigError("repair_crews must be >= 0 (0 = unlimited)")
        if self.adr_budget_hours < 0:
            raise ConfigError("adr_budget_hours must be >= 0")
        if set(self.role_schedule.upper()) - {"A", "D"}:
            raise ConfigError("role_schedule must be a string over {A, D}")
        if self.inference_window < 1:
            raise ConfigError("inference_window must be >= 1")
        _check_range(self.demand_firepower, "demand_firepower")
        _check_range(self.demand_capacity, "demand_capacity")
        for name in ("n_gun_trucks", "n_transports", "n_chassis", "n_weapon", "n_cargo"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("gun_firepower", "transport_capacity", "weapon_firepower", "cargo_capacity"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.slots < 1:
            raise ConfigError("slots must be >= 1")
        if not (0 < self.damage_cap <= 1 and self.damage_scale >= 0 and self.damage_eps > 0):
            raise ConfigError("damage constants out of range")
        return self

    # -- declarative text form -------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for f in dataclasses.fields(self):
            section = f.metadata["section"]
            if not cp.has_section(section):
                cp.add_section(section)
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ", ".join(repr(float(v)) for v in value)
            cp.set(section, f.name, str(value))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str, **overrides: Any) -> SimulationConfig:
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from exc
        known = {f.name: f for f in dataclasses.fields(cls)}
        values: dict[str, Any] = {}
        for section in cp.sections():
            for key, raw in cp.items(section):
                if key not in known:
                    raise ConfigError(f"unknown config key [{section}] {key}")
                values[key] = _coerce(known[key], raw)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values).validate()


def _coerce(f: dataclasses.Field, raw: str):
    default = f.default
    try:
        if isinstance(default, tuple):
            return tuple(float(v) for v in raw.split(","))
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {f.name}: {raw!r}") from exc


class Campaign:
    """One seeded campaign between a modular and a conventional fleet.

    After :meth:`run`, ``modular`` and ``conventional`` hold the final fleet
    states and ``census_log`` the modular module census after each engagement.
    """

    def __init__(self, config: SimulationConfig | None = None, seed: int = 0):
        self.config = (config or SimulationConfig()).validate()
        self.seed = seed
        cfg = self.config
        self.modular = modular_fleet(cfg.n_chassis, cfg.n_weapon, cfg.n_cargo,
                                     cfg.weapon_firepower, cfg.cargo_capacity, cfg.slots)
        self.conventional = conventional_fleet(cfg.n_gun_trucks, cfg.n_transports,
                                               cfg.gun_firepower, cfg.transport_capacity)
        self.census_log = [self.modular.module_census()]

    def _role(self, e: int, rng: np.random.Generator) -> str:
        schedule = self.config.role_schedule.upper()
        if schedule:
            return ATTACKER if schedule[e % len(schedule)] == "A" else DEFENDER
        return ATTACKER if rng.random() < 0.5 else DEFENDER

    def _prepare(self, e: int, rng: np.random.Generator):
        cfg = self.config
        role = self._role(e, rng)
        demand = generate_demand(rng, cfg.demand_firepower, cfg.demand_capacity)
        plan = plan_for_role(self.modular, role, demand, cfg.adr_budget_hours)
        apply_plan(self.modular, plan)
        masks = (availability_mask(self.modular, role, demand),
                 availability_mask(self.conventional, other_role(role), demand))
        return role, demand, masks

    def run(self) -> list[BattleRecord]:
        cfg = self.config
        rng = np.random.default_rng(self.seed)
        n = cfg.engagements
        n_stochastic = int(round(cfg.stochastic_fraction * n))
        crews = cfg.repair_crews or None
        payoffs = {MODULAR: RunningPayoffs(MODULAR), CONVENTIONAL: RunningPayoffs(CONVENTIONAL)}
        fleets = {MODULAR: self.modular, CONVENTIONAL: self.conventional}
        records: list[BattleRecord] = []
        if n == 0:
            return records
        prep = self._prepare(0, rng)
        for e in range(n):
            mod_role, demand, (mod_mask, conv_mask) = prep
            roles = {MODULAR: mod_role, CONVENTIONAL: other_role(mod_role)}
            masks = {MODULAR: mod_mask, CONVENTIONAL: conv_mask}
            phase = STOCHASTIC if e < n_stochastic else INTELLIGENT
            choice = {}
            for fleet in (MODULAR, CONVENTIONAL):
                if phase == INTELLIGENT:
                    q = infer_adversary(records, fleet, roles[fleet], cfg.inference_window)
                    choice[fleet] = select_strategy(phase, masks[fleet], rng, q,
                                                    payoffs[fleet].estimate(roles[fleet]))
                else:
                    choice[fleet] = select_strategy(phase, masks[fleet], rng)
            convoys = {
                f: assemble_convoy(fleets[f], roles[f], choice[f], demand) for f in fleets
            }
            for convoy in convoys.values():
                for v in convoy.vehicles:
                    v.status = DISPATCHED
            defender = MODULAR if mod_role == DEFENDER else CONVENTIONAL
            attacker = other_fleet(defender)
            outcome = resolve_confrontation(convoys[defender], convoys[attacker], demand, rng,
                                            cfg.damage_scale, cfg.damage_cap, cfg.damage_eps)
            for convoy in convoys.values():
                for v in convoy.vehicles:
                    v.status = READY
            mark_damaged(fleets[defender], outcome.damaged_defender, rng)
            mark_damaged(fleets[attacker], outcome.damaged_attacker, rng)
            for state in fleets.values():
                advance_recovery(state, cfg.gap_hours, crews)
            modular_won = outcome.defender_won == (defender == MODULAR)

            prep = self._prepare(e + 1, rng)
            record = BattleRecord(
                engagement_index=e,
                phase=phase,
                stage_in_window=e % 3 + 1,
                modular_role=mod_role,
                modular_strategy=choice[MODULAR],
                conventional_strategy=choice[CONVENTIONAL],
                modular_won=modular_won,
                modular_avail_mask=mod_mask,
                conventional_avail_mask=conv_mask,
                modular_next_mask=prep[2][0],
                conventional_next_mask=prep[2][1],
            )
            records.append(record)
            for p in payoffs.values():
                p.update(record)
            self.census_log.append(self.modular.module_census())
        return records


def other_fleet(fleet: str) -> str:
    return CONVENTIONAL if fleet == MODULAR else MODULAR


def run_campaign(config: SimulationConfig | None = None, seed: int = 0) -> list[BattleRecord]:
    """Simulate one campaign; the record stream is a pure function of (config, seed)."""
    return Campaign(config, seed).run()


def fleet_states(campaign: Campaign) -> tuple[FleetState, FleetState]:
    return campaign.modular, campaign.conventional
