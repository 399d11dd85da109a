"""Desk-scale attacker-defender campaigns between a modular and a conventional fleet."""
from .agents import RunningPayoffs, infer_adversary, select_strategy
from .campaign import Campaign, SimulationConfig, run_campaign
from .combat import Outcome, damage_probability, generate_demand, resolve_confrontation
from .fleet import (
    ASSEMBLY_HOURS,
    DISASSEMBLY_HOURS,
    RECOVERY_HOURS,
    Convoy,
    Demand,
    FleetState,
    ModuleUnit,
    ReconfigurationPlan,
    Vehicle,
    apply_plan,
    assemble_convoy,
    availability_mask,
    conventional_fleet,
    modular_fleet,
    reconfigure_plan,
    step_recovery,
)
from .records import BattleRecord, format_log, parse_log, read_log, write_log

__all__ = [
    "ASSEMBLY_HOURS", "DISASSEMBLY_HOURS", "RECOVERY_HOURS",
    "BattleRecord", "Campaign", "Convoy", "Demand", "FleetState", "ModuleUnit", "Outcome",
    "ReconfigurationPlan", "RunningPayoffs", "SimulationConfig", "Vehicle",
    "apply_plan", "assemble_convoy", "availability_mask", "conventional_fleet",
    "damage_probability", "format_log", "generate_demand", "infer_adversary", "modular_fleet",
    "parse_log", "read_log", "reconfigure_plan", "resolve_confrontation", "run_campaign",
    "select_strategy", "step_recovery", "write_log",
]
