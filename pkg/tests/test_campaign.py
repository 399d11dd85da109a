import numpy as np
import pytest

from fleetgame.errors import ConfigError, DataError, DomainError
from fleetgame.simulation import (
    Campaign,
    SimulationConfig,
    format_log,
    parse_log,
    read_log,
    run_campaign,
    write_log,
)
from fleetgame.simulation.agents import RunningPayoffs, infer_adversary, select_strategy
from fleetgame.simulation.fleet import CONVENTIONAL, MODULAR
from fleetgame.simulation.records import (
    ATTACKER,
    DEFENDER,
    INTELLIGENT,
    STOCHASTIC,
    BattleRecord,
)


def record(e=0, adv=5, role=ATTACKER, phase=INTELLIGENT, own=1, won=True):
    return BattleRecord(e, phase, e % 3 + 1, role, own, adv, won, 1023, 1023, 1023, 1023)


# -- inference and selection ---------------------------------------------------

def test_inference_uniform_prior():
    np.testing.assert_array_equal(infer_adversary([], MODULAR, ATTACKER, 10), np.full(10, 0.1))


def test_inference_add_one_smoothing():
    q = infer_adversary([record(e, adv=5) for e in range(10)], MODULAR, ATTACKER, 10)
    assert q[4] == pytest.approx(11 / 20, abs=1e-15)
    assert np.allclose(np.delete(q, 4), 1 / 20)


def test_inference_window_of_one():
    history = [record(0, adv=9), record(1, adv=2)]
    q = infer_adversary(history, MODULAR, ATTACKER, 1)
    assert q[1] == pytest.approx(2 / 11)
    assert np.allclose(np.delete(q, 1), 1 / 11)


def test_inference_from_conventional_view():
    # The conventional fleet sees the modular strategy as its adversary's.
    q = infer_adversary([record(0, own=7, role=ATTACKER)], CONVENTIONAL, DEFENDER, 5)
    assert q[6] == pytest.approx(2 / 11)
    assert np.allclose(infer_adversary([record(0)], CONVENTIONAL, ATTACKER, 5), 0.1)


def test_bad_window():
    with pytest.raises(DomainError):
        infer_adversary([], MODULAR, ATTACKER, 0)


def test_single_available_strategy_is_forced():
    rng = np.random.default_rng(0)
    assert select_strategy(STOCHASTIC, 1 << 6, rng) == 7
    assert select_strategy(INTELLIGENT, 1 << 6, rng, np.full(10, 0.1), np.zeros((10, 10))) == 7


def test_stochastic_selection_is_reproducible():
    a = [select_strategy(STOCHASTIC, 1023, np.random.default_rng(11)) for _ in range(3)]
    assert len(set(a)) == 1
    draws = [select_strategy(STOCHASTIC, 0b1010, np.random.default_rng(s)) for s in range(50)]
    assert set(draws) == {2, 4}


def test_intelligent_selection_is_best_response():
    q = np.zeros(10)
    q[4] = 1.0
    est = np.full((10, 10), 0.3)
    est[5, 4] = 0.9
    assert select_strategy(INTELLIGENT, 1023, np.random.default_rng(0), q, est) == 6
    # masked out: fall back to the lowest-index tie
    assert select_strategy(INTELLIGENT, 1023 & ~(1 << 5), np.random.default_rng(0), q, est) == 1


def test_intelligent_selection_needs_inputs():
    with pytest.raises(DomainError):
        select_strategy(INTELLIGENT, 1023, np.random.default_rng(0))


def test_running_payoffs():
    p = RunningPayoffs(MODULAR)
    p.update(record(0, own=2, adv=3, won=True))
    est = p.estimate(ATTACKER)
    assert est[1, 2] == pytest.approx(2 / 3)
    assert est[0, 0] == 0.5


# -- records ------------------------------------------------------------------------

def test_record_rejects_unavailable_choice():
    with pytest.raises(DomainError):
        BattleRecord(0, STOCHASTIC, 1, ATTACKER, 3, 1, True, 0b11, 1, 1, 1)


def test_log_round_trip(tmp_path):
    records = run_campaign(SimulationConfig(engagements=30), seed=5)
    assert parse_log(format_log(records)) == records
    path = tmp_path / "c.log"
    write_log(path, records)
    assert read_log(path) == records


def test_malformed_log_line():
    with pytest.raises(DataError):
        parse_log("0\tstochastic\t1\n")


# -- campaign -----------------------------------------------------------------------

def test_same_seed_same_bytes():
    cfg = SimulationConfig(engagements=60)
    assert format_log(run_campaign(cfg, 9)) == format_log(run_campaign(cfg, 9))
    assert format_log(run_campaign(cfg, 9)) != format_log(run_campaign(cfg, 10))


def test_zero_engagements():
    assert run_campaign(SimulationConfig(engagements=0), 1) == []


def test_phase_split_and_windows():
    records = run_campaign(SimulationConfig(engagements=20, stochastic_fraction=0.3), 2)
    assert [r.phase for r in records] == [STOCHASTIC] * 6 + [INTELLIGENT] * 14
    assert [r.stage_in_window for r in records[:6]] == [1, 2, 3, 1, 2, 3]


def test_role_schedule():
    records = run_campaign(SimulationConfig(engagements=9, role_schedule="AAD"), 0)
    assert [r.modular_role[0] for r in records] == list("aad" * 3)


def test_census_is_conserved_after_every_engagement():
    camp = Campaign(SimulationConfig(engagements=100), seed=4)
    camp.run()
    assert len(camp.census_log) == 101
    assert all(c == camp.census_log[0] for c in camp.census_log)


def test_next_masks_chain():
    records = run_campaign(SimulationConfig(engagements=40), 6)
    for a, b in zip(records, records[1:]):
        assert a.next_class == b.avail_class


@pytest.mark.parametrize("kwargs", [
    {"engagements": -1}, {"stochastic_fraction": 1.5}, {"role_schedule": "AX"},
    {"demand_firepower": (3.0, 2.0)}, {"inference_window": 0},
])
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        SimulationConfig(**kwargs).validate()


def test_config_ini_round_trip():
    cfg = SimulationConfig(engagements=17, role_schedule="AAD", demand_firepower=(3.0, 5.0))
    assert SimulationConfig.from_ini(cfg.to_ini()) == cfg
    assert SimulationConfig.from_ini(cfg.to_ini(), engagements=4).engagements == 4


def test_unknown_ini_key():
    with pytest.raises(ConfigError):
        SimulationConfig.from_ini("[campaign]\nbogus = 1\n")
