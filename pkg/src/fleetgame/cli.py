"""Command-line pipeline: simulate -> fit-tree -> estimate-game -> solve -> report.

Stages hand off through files. Exit codes: 0 ok, 2 configuration error,
3 data error, 4 internal error.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import ConfigError, DataError, DomainError, InfeasiblePlanError
from .estimation import (
    StageGameTree,
    build_three_stage_game,
    check_schedule,
    estimate_payoff_matrix,
    schedule_role,
    stage_windows,
)
from .multistage import (
    format_horizon_table,
    format_report,
    horizon_profiles,
    parse_report,
)
from .simulation.campaign import SimulationConfig, run_campaign
from .simulation.records import (
    ATTACKER,
    DEFENDER,
    INTELLIGENT,
    atomic_write_text,
    format_log,
    read_log,
)
from .strategies import format_strategy_table
from .trees import SUBSETS, fit_tree, partition_by_role, render_tree

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
MANIFEST = "manifest.ini"
log = logging.getLogger("fleetgame")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _writable_dir(path: str) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {p}: {exc.strerror}") from exc
    if not p.is_dir():
        raise ConfigError(f"{p} is not a directory")
    return p


def _writable_file(path: str) -> Path:
    p = Path(path)
    parent = p.parent if str(p.parent) else Path(".")
    if not parent.is_dir():
        raise ConfigError(f"output directory {parent} does not exist")
    return p


def _log_files(paths: list[str]) -> list[Path]:
    files: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            manifest = p / MANIFEST
            if manifest.exists():
                cp = configparser.ConfigParser()
                cp.read(manifest, encoding="utf-8")
                files += [p / name for name in cp.options("files")] if cp.has_section("files") else []
            else:
                files += sorted(p.glob("*.log"))
        elif p.exists():
            files.append(p)
        else:
            raise DataError(f"missing input {p}")
    if not files:
        raise DataError("no battle logs found")
    return files


def _read_logs(paths: list[str]):
    records = []
    for f in _log_files(paths):
        if not f.exists():
            raise DataError(f"missing log file {f}")
        records.extend(read_log(f))
    return records


# ---------------------------------------------------------------------------
# subcommands


def cmd_dump_strategies(args) -> int:
    text = format_strategy_table()
    if args.out:
        atomic_write_text(_writable_file(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _simulation_config(args) -> SimulationConfig:
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from exc
    return SimulationConfig.from_ini(
        text,
        engagements=args.engagements,
        role_schedule=args.role_schedule,
        stochastic_fraction=args.stochastic_fraction,
    )


def _campaign_log(job) -> str:
    config, seed = job
    return format_log(run_campaign(config, seed))


def cmd_simulate(args) -> int:
    if args.seed is None or not 0 <= args.seed < 2**64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    if args.count < 0:
        raise ConfigError("--count must be >= 0")
    config = _simulation_config(args)
    out = _writable_dir(args.out)
    jobs = [(config, args.seed + k) for k in range(args.count)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            texts = list(pool.map(_campaign_log, jobs))
    else:
        texts = [_campaign_log(job) for job in jobs]
    names = [f"campaign_{k:03d}.log" for k in range(args.count)]
    for name, text in zip(names, texts):
        atomic_write_text(out / name, text)
    manifest = config.to_ini()
    manifest += f"[run]\nseed = {args.seed}\ncount = {args.count}\n\n[files]\n"
    manifest += "".join(f"{name} = {text.count(chr(10))}\n" for name, text in zip(names, texts))
    atomic_write_text(out / MANIFEST, manifest)
    log.info("wrote %d campaign logs to %s", args.count, out)
    return EXIT_OK


def cmd_fit_tree(args) -> int:
    records = _read_logs(args.logs)
    out = _writable_dir(args.out)
    subsets = partition_by_role(records)
    if not any(subsets.values()):
        raise DataError("no intelligent-phase records to fit")
    summary = ["subset\tcases\troot_entropy\tdepth\tleaf_win_fractions"]
    outputs = {}
    for name, cases in subsets.items():
        if not cases:
            summary.append(f"{name}\t0\t-\t-\t-")
            outputs[f"{name}.tree.txt"] = "(no cases)\n"
            outputs[f"{name}.dot"] = f"digraph {name} {{\n}}\n"
            continue
        tree = fit_tree(cases, args.purity, args.min_samples, args.max_depth)
        outline, dot = render_tree(tree, name)
        outputs[f"{name}.tree.txt"] = outline
        outputs[f"{name}.dot"] = dot
        leaves = ",".join(f"{leaf.win_count}/{leaf.n}" for leaf in tree.leaves())
        summary.append(f"{name}\t{len(cases)}\t{tree.entropy:.6f}\t{tree.depth()}\t{leaves}")
    outputs["summary.tsv"] = "\n".join(summary) + "\n"
    for fname, text in outputs.items():
        atomic_write_text(out / fname, text)
    sys.stdout.write(outputs["summary.tsv"])
    return EXIT_OK


def _stage1_pooled(records, schedule: str):
    windows = stage_windows(records, len(schedule))
    roles = tuple(schedule_role(schedule, t) for t in range(1, len(schedule) + 1))
    first = [w[0] for w in windows if tuple(r.modular_role for r in w) == roles]
    return estimate_payoff_matrix(first, roles[0])


def cmd_estimate_game(args) -> int:
    schedule = check_schedule(args.role_schedule)
    if len(schedule) != 3:
        raise ConfigError("--role-schedule must have exactly 3 characters")
    out = _writable_file(args.out)
    records = _read_logs(args.logs)
    try:
        game = build_three_stage_game(records, schedule)
    except DomainError as exc:
        raise DataError(str(exc)) from exc
    empty_stages = [t for t in range(1, 4)
                    if not any(game.matrices[(t, k)].populated for k in game.stage_classes(t))]
    if empty_stages:
        pairs = ", ".join(f"(stage {t}, class {k})" for t, k in game.unpopulated())
        raise DataError(f"insufficient data; unpopulated: {pairs}")
    pooled = _stage1_pooled(records, schedule)
    rendering = "Stage-1 pooled payoff matrix (rows: modular, columns: conventional)\n" + pooled.render()
    atomic_write_text(out, game.to_text())
    atomic_write_text(Path(str(out) + ".stage1.txt"), rendering)
    if game.unpopulated():
        log.warning("%d (stage, class) pairs use fallback matrices", len(game.unpopulated()))
    sys.stdout.write(rendering)
    return EXIT_OK


def cmd_solve(args) -> int:
    out = _writable_file(args.out)
    try:
        text = Path(args.game).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read game file {args.game}: {exc.strerror}") from exc
    try:
        game = StageGameTree.from_text(text)
    except DomainError as exc:
        raise DataError(f"malformed game file: {exc}") from exc
    profiles = horizon_profiles(game)
    report = format_report(profiles)
    table = format_horizon_table(parse_report(report))
    atomic_write_text(out, report)
    atomic_write_text(Path(str(out) + ".summary.txt"), table)
    sys.stdout.write(table)
    return EXIT_OK


def _win_rate_section(records) -> str:
    lines = ["fleet\trole\tengagements\twins\twin_rate"]
    total = 0
    for fleet in ("modular", "conventional"):
        for role in (ATTACKER, DEFENDER):
            mod_role = role if fleet == "modular" else (DEFENDER if role == ATTACKER else ATTACKER)
            rs = [r for r in records if r.modular_role == mod_role]
            wins = sum(r.modular_won == (fleet == "modular") for r in rs)
            rate = f"{wins / len(rs):.4f}" if rs else "-"
            lines.append(f"{fleet}\t{role}\t{len(rs)}\t{wins}\t{rate}")
            total += len(rs)
    intelligent = sum(r.phase == INTELLIGENT for r in records)
    lines.append(f"total records\t{len(records)}\t(intelligent phase: {intelligent})")
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    out = _writable_file(args.out)
    trees = Path(args.trees)
    tree_files = [trees / f"{name}.tree.txt" for name, _, _ in SUBSETS]
    required = tree_files + [Path(args.game), Path(args.equilibria)]
    missing = [str(p) for p in required if not p.exists()]
    if missing:
        raise DataError("missing inputs: " + ", ".join(missing))
    records = _read_logs(args.logs)
    game = StageGameTree.from_text(Path(args.game).read_text(encoding="utf-8"))
    pooled = _stage1_pooled(records, game.role_schedule)
    rows = parse_report(Path(args.equilibria).read_text(encoding="utf-8"))
    parts = ["# Fleet competition analysis\n", "## Win rates\n", _win_rate_section(records), "\n## Decision trees\n"]
    for (name, _, _), f in zip(SUBSETS, tree_files):
        parts += [f"### {name}\n", f.read_text(encoding="utf-8"), "\n"]
    parts += [f"## Stage-1 payoff matrix (schedule {game.role_schedule})\n", pooled.render(), "\n"]
    parts += ["## Equilibrium strategy by horizon\n", format_horizon_table(rows)]
    atomic_write_text(out, "".join(parts))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fleetgame", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("dump-strategies", help="write the attack/defense strategy tables")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_dump_strategies)

    p = sub.add_parser("simulate", help="run seeded campaigns and write battle logs")
    p.add_argument("--seed", type=int, required=True, help="base seed; campaign k uses seed + k")
    p.add_argument("--count", type=int, default=20, help="number of campaigns (default 20)")
    p.add_argument("--engagements", type=int, default=None, help="engagements per campaign (default 200)")
    p.add_argument("--stochastic-fraction", type=float, default=None,
                   help="share of engagements in the stochastic phase (default 0.3)")
    p.add_argument("--role-schedule", default=None,
                   help="fixed cyclic modular role schedule over A/D (default: fair coin)")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-tree", help="fit the four fleet x role decision trees")
    p.add_argument("--logs", nargs="+", required=True, help="log files or simulate output directories")
    p.add_argument("--purity", type=float, default=0.2)
    p.add_argument("--min-samples", type=int, default=5)
    p.add_argument("--max-depth", type=int, default=6)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit_tree)

    p = sub.add_parser("estimate-game", help="estimate the three-stage game from logs")
    p.add_argument("--logs", nargs="+", required=True)
    p.add_argument("--role-schedule", default="AAD", help="modular roles per stage (default AAD)")
    p.add_argument("--out", required=True, help="game file")
    p.set_defaults(func=cmd_estimate_game)

    p = sub.add_parser("solve", help="solve 1-, 2- and 3-stage horizons by backward induction")
    p.add_argument("--game", required=True)
    p.add_argument("--out", required=True, help="equilibrium report file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("report", help="combine all artifacts into one document")
    p.add_argument("--logs", nargs="+", required=True)
    p.add_argument("--trees", required=True, help="fit-tree output directory")
    p.add_argument("--game", required=True)
    p.add_argument("--equilibria", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.verbose:
        log.setLevel(logging.INFO)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DomainError, InfeasiblePlanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
