"""Demand generation and stochastic confrontation resolution."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .fleet import Convoy, Demand

DAMAGE_SCALE = 0.3
DAMAGE_CAP = 0.9
DAMAGE_EPS = 1e-6


def _check_range(rng_range, name: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in rng_range)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a (lo, hi) pair") from exc
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo <= 0 or hi < lo:
        raise ConfigError(f"{name} must satisfy 0 < lo <= hi, got ({lo}, {hi})")
    return lo, hi


def generate_demand(rng: np.random.Generator, firepower_range=(2.0, 6.0), capacity_range=(2.0, 6.0)) -> Demand:
    """Draw both requirements independently and uniformly from their ranges."""
    f_lo, f_hi = _check_range(firepower_range, "firepower range")
    c_lo, c_hi = _check_range(capacity_range, "capacity range")
    fp = f_lo if f_lo == f_hi else float(rng.uniform(f_lo, f_hi))
    cap = c_lo if c_lo == c_hi else float(rng.uniform(c_lo, c_hi))
    return Demand(fp, cap)


def damage_probability(own_firepower: float, opposing_firepower: float,
                       scale: float = DAMAGE_SCALE, cap: float = DAMAGE_CAP,
                       eps: float = DAMAGE_EPS) -> float:
    return min(cap, scale * opposing_firepower / max(own_firepower, eps))


@dataclass(frozen=True)
class Outcome:
    defender_won: bool
    damaged_defender: tuple[str, ...]
    damaged_attacker: tuple[str, ...]
    defender_damage_p: float
    attacker_damage_p: float


def resolve_confrontation(defender: Convoy, attacker: Convoy, demand: Demand,
                          rng: np.random.Generator, scale: float = DAMAGE_SCALE,
                          cap: float = DAMAGE_CAP, eps: float = DAMAGE_EPS) -> Outcome:
    """Damage both convoys and decide the winner.

    Every vehicle is independently damaged with a probability that grows with
    the opposing/own firepower ratio. Defender vehicles draw first, in convoy
    order. The defender wins iff its surviving vehicles still meet both demand
    requirements; otherwise the attacker wins.
    """
    d_fp, a_fp = defender.total_firepower, attacker.total_firepower
    p_def = damage_probability(d_fp, a_fp, scale, cap, eps)
    p_att = damage_probability(a_fp, d_fp, scale, cap, eps)
    hit_def = rng.random(len(defender.vehicles)) < p_def
    hit_att = rng.random(len(attacker.vehicles)) < p_att
    survivors = [v for v, hit in zip(defender.vehicles, hit_def) if not hit]
    fp = sum(v.firepower for v in survivors)
    cp = sum(v.capacity for v in survivors)
    won = fp >= demand.firepower_req and cp >= demand.capacity_req
    return Outcome(
        defender_won=bool(won),
        damaged_defender=tuple(v.id for v, hit in zip(defender.vehicles, hit_def) if hit),
        damaged_attacker=tuple(v.id for v, hit in zip(attacker.vehicles, hit_att) if hit),
        defender_damage_p=p_def,
        attacker_damage_p=p_att,
    )
