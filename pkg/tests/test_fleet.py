from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import subset_mask

from fleetgame.errors import (
    ConfigError,
    DomainError,
    InfeasiblePlanError,
    UnsupportedOperationError,
)
from fleetgame.simulation import fleet as fl
from fleetgame.simulation.combat import (
    damage_probability,
    generate_demand,
    resolve_confrontation,
)
from fleetgame.simulation.fleet import (
    ASSEMBLY_HOURS,
    CARGO,
    CHASSIS,
    DISASSEMBLY_HOURS,
    RECOVERY_HOURS,
    WEAPON,
    Convoy,
    Demand,
    FleetState,
    ModuleUnit,
    Vehicle,
    apply_plan,
    assemble_convoy,
    availability_mask,
    conventional_fleet,
    mark_damaged,
    modular_fleet,
    reconfigure_plan,
    step_recovery,
)
from fleetgame.strategies import classify_attack, classify_defense


def plain_fleet(attrs):
    vehicles = [Vehicle(f"V{k:02d}", base_firepower=fp, base_capacity=cap) for k, (fp, cap) in enumerate(attrs)]
    return FleetState(fl.CONVENTIONAL, vehicles)


def modular_state(compositions, spares=()):
    vehicles = []
    for k, comp in enumerate(compositions):
        mods = [ModuleUnit(f"{kind[0]}{k}{n}", kind, firepower=2.0 * (kind == WEAPON),
                           capacity=2.0 * (kind == CARGO)) for n, kind in enumerate(comp)]
        vehicles.append(Vehicle(f"M{k:02d}", chassis=ModuleUnit(f"C{k:02d}", CHASSIS), modules=mods))
    spare = [ModuleUnit(f"S{n}", kind, firepower=2.0 * (kind == WEAPON), capacity=2.0 * (kind == CARGO))
             for n, kind in enumerate(spares)]
    return FleetState(fl.MODULAR, vehicles, spare)


# -- downtime constants --------------------------------------------------------

def test_downtime_constants():
    assert ASSEMBLY_HOURS == 1.0
    assert DISASSEMBLY_HOURS == 0.5
    assert RECOVERY_HOURS == 10.0


def test_identity_plan_is_free():
    state = modular_fleet()
    plan = reconfigure_plan(state, state.composition_census())
    assert plan.actions == ()
    assert plan.total_downtime == 0.0


def test_single_module_swap_costs_one_and_a_half_hours():
    state = modular_state([(CARGO, WEAPON), (CARGO, WEAPON)], spares=[WEAPON])
    plan = reconfigure_plan(state, {(CARGO, WEAPON): 1, (WEAPON, WEAPON): 1})
    assert [a.action for a in plan.actions] == ["disassemble", "assemble"]
    assert plan.total_downtime == 1.5


def test_three_double_swaps_cost_nine_hours():
    state = modular_state([(WEAPON, WEAPON)] * 3, spares=[CARGO] * 6)
    plan = reconfigure_plan(state, {(CARGO, CARGO): 3})
    assert len(plan.actions) == 12
    assert plan.total_downtime == sum(a.hours for a in plan.actions) == 9.0
    spent = apply_plan(state, plan)
    assert spent == 9.0 and state.clock == 9.0
    assert state.composition_census() == Counter({(CARGO, CARGO): 3})
    assert Counter(m.kind for m in state.spare_modules) == Counter({WEAPON: 6})


def test_apply_plan_respects_budget():
    state = modular_state([(WEAPON, WEAPON)] * 3, spares=[CARGO] * 6)
    plan = reconfigure_plan(state, {(CARGO, CARGO): 3})
    before = state.module_census()
    spent = apply_plan(state, plan, budget_hours=4.0)
    assert spent <= 4.0
    assert state.module_census() == before


def test_conventional_fleet_cannot_reconfigure():
    with pytest.raises(UnsupportedOperationError):
        reconfigure_plan(conventional_fleet(), {})


@pytest.mark.parametrize("target", [
    {(WEAPON, WEAPON): 8},             # not enough weapons
    {(CARGO, WEAPON): 7},              # wrong vehicle count
    {(CARGO, WEAPON, WEAPON): 8},      # too many slots
    {(CHASSIS,): 8},                   # not a payload module
])
def test_unachievable_targets(target):
    with pytest.raises(InfeasiblePlanError):
        reconfigure_plan(modular_fleet(), target)


# -- assembly and availability --------------------------------------------------

def test_assembly_picks_minimal_convoy():
    state = plain_fleet([(4, 0)] * 3)
    convoy = assemble_convoy(state, fl.ATTACKER, 3, Demand(4, 4))
    assert len(convoy.vehicles) == 1
    assert convoy.safety(Demand(4, 4))[0] == 1.0


def test_give_up_convoy_is_empty():
    convoy = assemble_convoy(conventional_fleet(), fl.DEFENDER, 1, Demand(3, 3))
    assert convoy.vehicles == []
    assert (convoy.total_firepower, convoy.total_capacity) == (0.0, 0.0)


def test_empty_fleet_is_infeasible():
    state = plain_fleet([])
    assert assemble_convoy(state, fl.ATTACKER, 3, Demand(1, 1)) is None
    assert availability_mask(state, fl.DEFENDER, Demand(1, 1)) == 1


def test_abundant_fleet_has_every_strategy():
    state = plain_fleet([(1, 0)] * 10 + [(0, 1)] * 10)
    demand = Demand(2, 2)
    assert availability_mask(state, fl.DEFENDER, demand) == 1023
    assert availability_mask(state, fl.ATTACKER, demand) == 1023
    # The subset oracle on the firepower half alone confirms the attack side.
    assert subset_mask([(1, 0)] * 10, 2, 2, fl.ATTACKER) == 1023


def test_exact_one_point_two_inventory():
    D = 5.0
    vehicles = [(0.6 * D, 0.0)] * 2
    mask = availability_mask(plain_fleet(vehicles), fl.ATTACKER, Demand(D, D))
    assert mask == 0b111
    assert mask == subset_mask(vehicles, D, D, fl.ATTACKER)


attr_values = st.sampled_from([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(attr_values, attr_values), max_size=8),
       st.floats(1.0, 6.0), st.floats(1.0, 6.0), st.sampled_from([fl.ATTACKER, fl.DEFENDER]))
def test_availability_matches_subset_oracle(attrs, dfp, dcap, role):
    state = plain_fleet(attrs)
    demand = Demand(dfp, dcap)
    mask = availability_mask(state, role, demand)
    assert mask == subset_mask(attrs, dfp, dcap, role)
    for s in range(1, 11):
        convoy = assemble_convoy(state, role, s, demand)
        assert (convoy is not None) == bool(mask >> (s - 1) & 1)
        if convoy is None:
            continue
        sf, sc = convoy.safety(demand)
        got = classify_attack(sf) if role == fl.ATTACKER else classify_defense((sf, sc))
        assert got == s


def test_default_modular_fleet_matches_oracle():
    state = modular_fleet()
    attrs = [(v.firepower, v.capacity) for v in state.ready_vehicles()]
    for role in (fl.ATTACKER, fl.DEFENDER):
        assert availability_mask(state, role, Demand(5, 5)) == subset_mask(attrs, 5, 5, role)


def test_fleet_builders():
    conv = conventional_fleet()
    assert len(conv.vehicles) == 16
    assert sum(v.firepower for v in conv.vehicles) == 16
    mod = modular_fleet()
    assert mod.module_census() == Counter({CHASSIS: 8, WEAPON: 8, CARGO: 8})
    assert sum(v.firepower for v in mod.vehicles) == 16
    assert sum(v.capacity for v in mod.vehicles) == 16


# -- recovery --------------------------------------------------------------------

def damaged_module_state():
    state = modular_state([(WEAPON, CARGO)])
    mark_damaged(state, ["M00"])  # no rng: every component is damaged
    return state


def test_recovery_dt_zero_is_identity():
    state = damaged_module_state()
    after = step_recovery(state, 0.0)
    assert after == state


def test_recovery_completes_after_ten_hours():
    state = damaged_module_state()
    assert state.ready_vehicles() == []
    after = step_recovery(state, 10.0)
    assert all(m.status == fl.READY for m in after.spare_modules)
    assert after.vehicle("M00").status == fl.READY
    assert state.vehicle("M00").status == fl.RECOVERING  # input untouched


def test_recovery_is_additive():
    state = damaged_module_state()
    split = step_recovery(step_recovery(state, 4.0), 6.0)
    whole = step_recovery(state, 10.0)
    assert split == whole


def test_serial_crews_queue_in_order():
    state = plain_fleet([(2, 0), (2, 0)])
    mark_damaged(state, ["V00", "V01"])
    after = step_recovery(state, 10.0, crews=1)
    assert [v.status for v in after.vehicles] == [fl.READY, fl.RECOVERING]
    assert step_recovery(after, 10.0, crews=1).vehicles[1].status == fl.READY


def test_salvage_keeps_census():
    state = modular_fleet()
    before = state.module_census()
    mark_damaged(state, ["M00", "M01", "M02"], np.random.default_rng(3))
    assert state.module_census() == before


def test_negative_dt_rejected():
    with pytest.raises(DomainError):
        step_recovery(conventional_fleet(), -1.0)


# -- demand and damage -------------------------------------------------------------

def test_degenerate_demand_range():
    assert generate_demand(np.random.default_rng(0), (10, 10), (5, 5)) == Demand(10, 5)


def test_demand_is_seed_deterministic():
    a = generate_demand(np.random.default_rng(42))
    b = generate_demand(np.random.default_rng(42))
    assert a == b


def test_demand_mean_within_three_standard_errors():
    rng = np.random.default_rng(7)
    draws = np.array([generate_demand(rng, (5, 15), (1, 2)).firepower_req for _ in range(10_000)])
    se = (10 / np.sqrt(12)) / np.sqrt(len(draws))
    assert abs(draws.mean() - 10) < 3 * se


@pytest.mark.parametrize("rng_range", [(3, 2), (0, 1), (1, float("inf"))])
def test_bad_demand_range(rng_range):
    with pytest.raises(ConfigError):
        generate_demand(np.random.default_rng(0), rng_range)


def test_invalid_demand():
    with pytest.raises(DomainError):
        Demand(0, 1)


def test_damage_probability_example():
    assert damage_probability(2, 3) == pytest.approx(0.45, abs=1e-15)
    assert damage_probability(1, 10) == 0.9
    assert damage_probability(0, 1) == 0.9
    assert damage_probability(3, 0) == 0.0


@given(st.floats(0, 50), st.floats(0, 50), st.floats(0, 50))
def test_damage_monotone_in_attacker_firepower(own, a, b):
    lo, hi = sorted((a, b))
    assert damage_probability(own, lo) <= damage_probability(own, hi)


def test_unopposed_defender_meeting_demand_wins():
    defender = Convoy([Vehicle("G", base_firepower=5, base_capacity=5)])
    for seed in range(20):
        out = resolve_confrontation(defender, Convoy(), Demand(4, 4), np.random.default_rng(seed))
        assert out.defender_won and out.damaged_defender == ()


def test_empty_defender_loses():
    attacker = Convoy([Vehicle("A", base_firepower=1)])
    out = resolve_confrontation(Convoy(), attacker, Demand(1, 1), np.random.default_rng(0))
    assert not out.defender_won
