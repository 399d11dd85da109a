"""Backward induction over the stage-game tree, plus the equilibrium report format."""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from ._validation import N_STRATEGIES
from .errors import DataError
from .estimation import StageGameTree, propagate_stage_payoffs, schedule_role
from .nash import Equilibrium, find_nash, select_equilibrium
from .simulation.records import ATTACKER, DEFENDER


@dataclass
class EquilibriumProfile:
    """Selected equilibrium for every (stage, class) of a solved tree.

    Stage-t values are cumulative: they include the expected value of the
    stages after t. ``path`` follows the most likely class from the most
    frequent stage-1 class onwards.
    """

    horizon: int
    role_schedule: str
    stages: dict[int, dict[int, Equilibrium]]
    initial: dict[int, int]
    path: list[tuple[int, int]] = field(default_factory=list)

    @property
    def values(self) -> tuple[float, float]:
        """Cumulative values averaged over the stage-1 class distribution."""
        total = sum(self.initial.values())
        eqs = self.stages[1]
        v_mod = sum(n * eqs[k].value_row for k, n in self.initial.items()) / total
        v_conv = sum(n * eqs[k].value_col for k, n in self.initial.items()) / total
        return v_mod, v_conv

    def path_equilibria(self) -> list[tuple[int, int, Equilibrium]]:
        return [(t, k, self.stages[t][k]) for t, k in self.path]


def solve_stage(matrices) -> dict[int, Equilibrium]:
    return {
        k: select_equilibrium(find_nash(M.r_mod, M.r_conv, M.modular_mask, M.conventional_mask))
        for k, M in matrices.items()
    }


def solve_multistage(game: StageGameTree, horizon: int | None = None) -> EquilibriumProfile:
    """Solve the last stage first, then fold equilibrium values back stage by stage.

    1. solve every last-stage class game;
    2. add those values to the previous stage's matrices through the
       transition probabilities;
    3. solve that stage; repeat down to stage 1.
    """
    if horizon is not None:
        game = game.truncate(horizon)
    game.validate()
    H = game.n_stages
    stages: dict[int, dict[int, Equilibrium]] = {}
    continuation: dict[int, tuple[float, float]] = {}
    for t in range(H, 0, -1):
        mats = game.stage_matrices(t)
        if t < H:
            mats = propagate_stage_payoffs(mats, game.transitions, continuation, t)
        stages[t] = solve_stage(mats)
        continuation = {k: (e.value_row, e.value_col) for k, e in stages[t].items()}
    profile = EquilibriumProfile(H, game.role_schedule, stages, dict(game.initial))
    profile.path = _likely_path(game, stages)
    return profile


def _likely_path(game: StageGameTree, stages) -> list[tuple[int, int]]:
    if not game.initial:
        return []
    k = min(game.initial, key=lambda c: (-game.initial[c], c))
    path = [(1, k)]
    for t in range(1, game.n_stages):
        eq = stages[t][k]
        mass: dict[int, float] = {}
        for i in np.flatnonzero(eq.row > 0):
            for j in np.flatnonzero(eq.col > 0):
                for k2, p in game.transitions.distribution(t, k, i + 1, j + 1).items():
                    mass[k2] = mass.get(k2, 0.0) + eq.row[i] * eq.col[j] * p
        k = min(mass, key=lambda c: (-mass[c], c))
        path.append((t + 1, k))
    return path


# ---------------------------------------------------------------------------
# Reports


def _vec(v: np.ndarray) -> str:
    return ",".join(repr(float(p)) for p in v)


def strategy_label(eq_vec: np.ndarray, role: str) -> str:
    """Label of the most probable pure strategy, e.g. ``a10``; ties go to the higher index."""
    i = int(np.flatnonzero(eq_vec >= eq_vec.max() - 1e-9)[-1]) + 1
    return ("a" if role == ATTACKER else "d") + str(i)


def format_report(profiles: list[EquilibriumProfile]) -> str:
    """Tab-separated report: one line per (horizon, stage, class) equilibrium.

    Fields: horizon, stage, class, on_path, modular_role, row strategy (10
    comma-separated probabilities), column strategy, value_row, value_col,
    degenerate flag.
    """
    buf = io.StringIO()
    buf.write("# horizon\tstage\tclass\ton_path\tmodular_role\trow\tcol\tvalue_row\tvalue_col\tdegenerate\n")
    for r in report_rows(profiles):
        e = r.equilibrium
        buf.write(f"{r.horizon}\t{r.stage}\t{r.cls}\t{int(r.on_path)}\t{r.modular_role}\t{_vec(e.row)}"
                  f"\t{_vec(e.col)}\t{e.value_row!r}\t{e.value_col!r}\t{int(e.degenerate_flag)}\n")
    return buf.getvalue()


@dataclass(frozen=True)
class ReportRow:
    horizon: int
    stage: int
    cls: int
    on_path: bool
    modular_role: str
    equilibrium: Equilibrium


def report_rows(profiles: list[EquilibriumProfile]) -> list[ReportRow]:
    rows = []
    for prof in profiles:
        on_path = set(prof.path)
        for t in sorted(prof.stages):
            role = schedule_role(prof.role_schedule, t)
            for k in sorted(prof.stages[t]):
                rows.append(ReportRow(prof.horizon, t, k, (t, k) in on_path, role, prof.stages[t][k]))
    return rows


def parse_report(text: str) -> list[ReportRow]:
    rows = []
    try:
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            p = line.split("\t")
            row = np.array([float(v) for v in p[5].split(",")])
            col = np.array([float(v) for v in p[6].split(",")])
            if row.shape != (N_STRATEGIES,) or col.shape != (N_STRATEGIES,):
                raise DataError("strategy vectors must have 10 entries")
            eq = Equilibrium(row, col, float(p[7]), float(p[8]), p[9] == "1")
            rows.append(ReportRow(int(p[0]), int(p[1]), int(p[2]), p[3] == "1", p[4], eq))
    except (IndexError, ValueError) as exc:
        raise DataError(f"malformed equilibrium report: {exc}") from exc
    return rows


def format_horizon_table(rows: list[ReportRow]) -> str:
    """Human-readable comparison of the on-path selections across horizons."""
    path = sorted((r for r in rows if r.on_path), key=lambda r: (r.horizon, r.stage))
    if not path:
        raise DataError("report has no on-path equilibria")
    width = max(r.horizon for r in path)
    lines = ["\t".join(["Horizon", "Fleet"] + [f"Stage{t}" for t in range(1, width + 1)])]
    names = {1: "Single Stage", 2: "Two Stage", 3: "Three Stage"}
    for h in sorted({r.horizon for r in path}):
        mod, conv = [], []
        for r in (r for r in path if r.horizon == h):
            other = DEFENDER if r.modular_role == ATTACKER else ATTACKER
            mod.append(strategy_label(r.equilibrium.row, r.modular_role))
            conv.append(strategy_label(r.equilibrium.col, other))
        pad = ["N/A"] * (width - len(mod))
        lines.append("\t".join([names.get(h, f"{h} Stage"), "Modular"] + mod + pad))
        lines.append("\t".join(["", "Conv."] + conv + pad))
    return "\n".join(lines) + "\n"


def horizon_profiles(game: StageGameTree) -> list[EquilibriumProfile]:
    return [solve_multistage(game, h) for h in range(1, game.n_stages + 1)]
