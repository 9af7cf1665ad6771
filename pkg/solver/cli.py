import argparse
import asyncio
import logging
import os
import re
import sys
import yaml
from config import (
    CM3_PER_M3,
    DEFAULT_SEED,
    DEFAULT_TIME_LIMIT_MS,
    DEFAULT_WORKERS,
    EXIT_IO_ERROR,
    EXIT_OK,
    EXIT_VALIDATION_FAILED,
)
from dataclasses import dataclass, replace
from dataclasses_json import DataClassJsonMixin, dataclass_json, Undefined
from model import (
    Instance,
    Solution,
    SolveStats,
    leftover_volume,
    validate,
    volume_utilization,
)
from packing_io import (
    DocumentFormatError,
    InvalidSolutionError,
    ThpackParseError,
    consistency_violations,
    progress_record,
    read_solution_json,
    read_thpack_file,
    write_progress_csv,
    write_solution_json,
)
from search import Incumbent
from search_config import BRANCHING_STRATEGIES, SearchConfig, SearchConfigError
from solver_run import SolverRun
from typing import Dict, List, Optional, Sequence, Tuple

LOG = logging.getLogger(__name__)

_TIME_LIMIT = re.compile(r"^(\d+(?:\.\d+)?)(ms|s|m)?$")
_SUITE_SUFFIX = re.compile(r"_\d+$")


class InstanceIndexError(Exception):
    index: int
    count: int

    def __init__(self, index: int, count: int) -> None:
        super().__init__(f"instance index {index} out of range 1..{count}")
        self.index = index
        self.count = count


class ManifestError(Exception):
    pass


@dataclass_json(undefined=Undefined.EXCLUDE)
@dataclass
class RunReport(DataClassJsonMixin):
    instance: str
    volume_utilization_pct: float
    left_boxes: int
    leftover_cm3: int
    leftover_m3: float
    proved_optimal: bool
    wall_time_s: float
    incumbents: int
    nodes: int = 0
    propagations: int = 0

    @staticmethod
    def from_solution(
        instance: Instance, solution: Solution, stats: SolveStats
    ) -> "RunReport":
        leftover = leftover_volume(instance, solution)
        return RunReport(
            instance=instance.name,
            volume_utilization_pct=round(
                100 * volume_utilization(instance, solution), 4
            ),
            left_boxes=solution.left_boxes,
            leftover_cm3=leftover,
            leftover_m3=leftover / CM3_PER_M3,
            proved_optimal=stats.proved_optimal,
            wall_time_s=stats.wall_time,
            incumbents=stats.solutions_found,
            nodes=stats.nodes_explored,
            propagations=stats.propagations,
        )

    def line(self) -> str:
        return (
            f"{self.instance}: VU={self.volume_utilization_pct:.2f}%"
            f" LB={self.left_boxes}"
            f" leftover={self.leftover_cm3}cm3 ({self.leftover_m3:.2f}m3)"
            f" optimal={'yes' if self.proved_optimal else 'no'}"
            f" time={self.wall_time_s:.1f}s"
            f" incumbents={self.incumbents}"
        )


@dataclass
class SummaryRow:
    suite: str
    runs: int
    vu_min: float
    vu_avg: float
    vu_max: float
    lb_min: int
    lb_avg: float
    lb_max: int
    m3_min: float
    m3_avg: float
    m3_max: float
    lb_total: int


def parse_time_limit(text: str) -> int:
    """Milliseconds from `1500`, `1500ms`, `30s` or `2m`."""
    match = _TIME_LIMIT.match(text.strip())
    if not match:
        raise argparse.ArgumentTypeError(f"invalid time limit: {text!r}")
    value, unit = float(match.group(1)), match.group(2) or "ms"
    scale = {"ms": 1, "s": 1000, "m": 60_000}[unit]
    milliseconds = int(round(value * scale))
    if milliseconds <= 0:
        raise argparse.ArgumentTypeError(f"time limit must be positive: {text!r}")
    return milliseconds


def suite_of(instance_name: str) -> str:
    return _SUITE_SUFFIX.sub("", instance_name)


def load_instance(suite_path: str, index: int) -> Instance:
    suite = read_thpack_file(suite_path)
    if not 1 <= index <= len(suite.instances):
        raise InstanceIndexError(index, len(suite.instances))
    return suite.instances[index - 1]


def _write_text(path: str, text: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    # readers never see a half written file
    temporary = f"{path}.tmp"
    with open(temporary, "w", encoding="utf-8") as f:
        f.write(text)
        f.flush()
        os.fsync(f.fileno())
    os.replace(temporary, path)


async def _solve_streaming(
    instance: Instance, config: SearchConfig, echo: bool
) -> Tuple[Solution, SolveStats, List[Incumbent]]:
    incumbents: List[Incumbent] = []
    async with SolverRun(instance, config).run() as run:
        async for incumbent in run.incumbents():
            incumbents.append(incumbent)
            if echo:
                record = progress_record(
                    instance, incumbent.solution, incumbent.found_at
                )
                print(
                    f"[{instance.name}]: incumbent t={record.elapsed:.3f}s"
                    f" objective={record.objective}"
                    f" LB={record.left_boxes}"
                    f" VU={100 * record.volume_utilization:.2f}%"
                )
        solution, stats = await run.result()
    return solution, stats, incumbents


def run_instance(
    instance: Instance,
    config: SearchConfig,
    progress: Optional[str] = None,
    out: Optional[str] = None,
    echo: bool = False,
) -> RunReport:
    # The progress trace needs every incumbent whatever the caller asked to print.
    streaming = replace(config, emit_all=True)
    solution, stats, incumbents = asyncio.run(
        _solve_streaming(instance, streaming, echo)
    )

    if progress:
        records = [
            progress_record(instance, i.solution, i.found_at) for i in incumbents
        ]
        _write_text(progress, write_progress_csv(records))
    if out:
        _write_text(out, write_solution_json(instance, solution, stats))
    return RunReport.from_solution(instance, solution, stats)


def cmd_run(
    suite_path: str,
    index: int,
    time_limit_ms: int = DEFAULT_TIME_LIMIT_MS,
    workers: int = DEFAULT_WORKERS,
    seed: int = DEFAULT_SEED,
    emit_all: bool = False,
    progress: Optional[str] = None,
    out: Optional[str] = None,
    report: Optional[str] = None,
    show_stats: bool = False,
    branching: str = "largest_volume",
    item_symmetry: bool = True,
) -> int:
    try:
        instance = load_instance(suite_path, index)
        config = SearchConfig(
            time_limit=time_limit_ms / 1000,
            workers=workers,
            seed=seed,
            emit_all=emit_all,
            branching=branching,
            item_symmetry=item_symmetry,
        )
    except (
        OSError,
        UnicodeDecodeError,
        ThpackParseError,
        InstanceIndexError,
        SearchConfigError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO_ERROR

    try:
        result = run_instance(instance, config, progress, out, echo=emit_all)
    except InvalidSolutionError as e:
        for violation in e.violations:
            print(f"violation: {violation}", file=sys.stderr)
        return EXIT_VALIDATION_FAILED
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO_ERROR

    print(result.line())
    if show_stats:
        print(
            f"nodes={result.nodes} propagations={result.propagations}"
            f" incumbents={result.incumbents}"
            f" time={result.wall_time_s:.3f}s"
        )
    if report:
        try:
            _write_text(report, result.to_json(indent=2))
        except OSError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_IO_ERROR
    return EXIT_OK


def cmd_check(suite_path: str, index: int, solution_path: str) -> int:
    try:
        instance = load_instance(suite_path, index)
        with open(solution_path, "r", encoding="utf-8") as f:
            solution, document = read_solution_json(f.read())
    except (
        OSError,
        UnicodeDecodeError,
        ThpackParseError,
        InstanceIndexError,
        DocumentFormatError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO_ERROR

    violations = validate(instance, solution) + consistency_violations(
        instance, solution, document
    )
    if violations:
        for violation in violations:
            print(f"violation: {violation}")
        return EXIT_VALIDATION_FAILED
    print(
        f"{instance.name}: OK objective={solution.objective}"
        f" LB={solution.left_boxes}"
        f" VU={100 * volume_utilization(instance, solution):.2f}%"
    )
    return EXIT_OK


def summarize(reports: Sequence[RunReport]) -> List[SummaryRow]:
    """One row per suite ordered by name, then a TOTAL row."""
    by_suite: Dict[str, List[RunReport]] = {}
    for report in reports:
        by_suite.setdefault(suite_of(report.instance), []).append(report)

    rows = [_summary_row(suite, runs) for suite, runs in sorted(by_suite.items())]
    if rows:
        rows.append(_summary_row("TOTAL", list(reports)))
    return rows


def _summary_row(suite: str, runs: List[RunReport]) -> SummaryRow:
    vu = [r.volume_utilization_pct for r in runs]
    lb = [r.left_boxes for r in runs]
    m3 = [r.leftover_m3 for r in runs]
    return SummaryRow(
        suite=suite,
        runs=len(runs),
        vu_min=min(vu),
        vu_avg=sum(vu) / len(vu),
        vu_max=max(vu),
        lb_min=min(lb),
        lb_avg=sum(lb) / len(lb),
        lb_max=max(lb),
        m3_min=min(m3),
        m3_avg=sum(m3) / len(m3),
        m3_max=max(m3),
        lb_total=sum(lb),
    )


def format_summary(rows: Sequence[SummaryRow]) -> str:
    lines = [
        f"{'suite':<10} {'runs':>4} {'VU min':>7} {'VU avg':>7} {'VU max':>7}"
        f" {'LB min':>6} {'LB avg':>7} {'LB max':>6} {'LB sum':>6}"
        f" {'m3 min':>7} {'m3 avg':>7} {'m3 max':>7}"
    ]
    for row in rows:
        lines.append(
            f"{row.suite:<10} {row.runs:>4} {row.vu_min:>7.2f} {row.vu_avg:>7.2f}"
            f" {row.vu_max:>7.2f} {row.lb_min:>6} {row.lb_avg:>7.2f} {row.lb_max:>6}"
            f" {row.lb_total:>6} {row.m3_min:>7.2f} {row.m3_avg:>7.2f}"
            f" {row.m3_max:>7.2f}"
        )
    return "\n".join(lines)


def read_reports(paths: Sequence[str]) -> List[RunReport]:
    reports = []
    for path in paths:
        with open(path, "r", encoding="utf-8") as f:
            reports.append(RunReport.from_json(f.read()))
    return reports


def cmd_summarize(report_paths: Sequence[str]) -> int:
    try:
        reports = read_reports(report_paths)
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO_ERROR
    if not reports:
        print("error: no reports given", file=sys.stderr)
        return EXIT_IO_ERROR
    print(format_summary(summarize(reports)))
    return EXIT_OK


@dataclass
class BenchSuite:
    path: str
    first: Optional[int] = None


@dataclass
class BenchManifest:
    suites: List[BenchSuite]
    time_limit_ms: int = DEFAULT_TIME_LIMIT_MS
    workers: int = DEFAULT_WORKERS
    seed: int = DEFAULT_SEED
    output_dir: str = "results"


def load_manifest(path: str) -> BenchManifest:
    """Reads a YAML bench manifest; relative paths resolve against its directory."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ManifestError(f"{path}: {e}") from e
    if not isinstance(raw, dict) or not isinstance(raw.get("suites"), list):
        raise ManifestError(f"{path}: expected a mapping with a `suites` list")

    base = os.path.dirname(os.path.abspath(path))

    def resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.normpath(os.path.join(base, p))

    suites = []
    for entry in raw["suites"]:
        if isinstance(entry, str):
            entry = {"path": entry}
        if not isinstance(entry, dict) or "path" not in entry:
            raise ManifestError(f"{path}: suite entry without a path: {entry!r}")
        suites.append(BenchSuite(resolve(str(entry["path"])), entry.get("first")))

    time_limit = raw.get("time_limit", DEFAULT_TIME_LIMIT_MS)
    try:
        time_limit_ms = parse_time_limit(str(time_limit))
    except argparse.ArgumentTypeError as e:
        raise ManifestError(f"{path}: {e}") from e
    return BenchManifest(
        suites=suites,
        time_limit_ms=time_limit_ms,
        workers=int(raw.get("workers", DEFAULT_WORKERS)),
        seed=int(raw.get("seed", DEFAULT_SEED)),
        output_dir=resolve(str(raw.get("output_dir", "results"))),
    )


def cmd_bench(manifest_path: str) -> int:
    try:
        manifest = load_manifest(manifest_path)
        config = SearchConfig(
            time_limit=manifest.time_limit_ms / 1000,
            workers=manifest.workers,
            seed=manifest.seed,
        )
    except (OSError, ManifestError, SearchConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO_ERROR

    os.makedirs(manifest.output_dir, exist_ok=True)
    reports: List[RunReport] = []
    for bench_suite in manifest.suites:
        try:
            suite = read_thpack_file(bench_suite.path)
        except (OSError, UnicodeDecodeError, ThpackParseError) as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_IO_ERROR
        instances = suite.instances[: bench_suite.first]
        for instance in instances:
            stem = os.path.join(manifest.output_dir, instance.name)
            report_path = f"{stem}.report.json"
            if os.path.exists(report_path):
                try:
                    reports.extend(read_reports([report_path]))
                    print(f"|SKIP| {instance.name}")
                    continue
                except (OSError, ValueError, KeyError, TypeError) as e:
                    LOG.warning("unreadable report %s: %s", report_path, e)
                    print(f"|RERUN| {instance.name}")
            print(f"|RUN| {instance.name}")
            try:
                report = run_instance(
                    instance,
                    config,
                    progress=f"{stem}.progress.csv",
                    out=f"{stem}.solution.json",
                )
            except InvalidSolutionError as e:
                for violation in e.violations:
                    print(f"violation: {violation}", file=sys.stderr)
                return EXIT_VALIDATION_FAILED
            _write_text(report_path, report.to_json(indent=2))
            print(report.line())
            reports.append(report)

    if reports:
        print("")
        print(format_summary(summarize(reports)))
    return EXIT_OK


def _add_instance_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--suite", required=True, help="Path to a thpack suite file")
    parser.add_argument(
        "--index", type=int, required=True, help="1-based instance position in the file"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="packlab", description="Anytime exact single container loading"
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Log search progress (-v) or everything (-vv)",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Solve one instance of a thpack file")
    _add_instance_arguments(run)
    run.add_argument(
        "-t",
        "--time-limit",
        type=parse_time_limit,
        default=DEFAULT_TIME_LIMIT_MS,
        help="Wall clock limit, milliseconds unless suffixed with s or m",
    )
    run.add_argument("-p", "--workers", type=int, default=DEFAULT_WORKERS)
    run.add_argument("-r", "--seed", type=int, default=DEFAULT_SEED)
    run.add_argument(
        "-a", "--emit-all", action="store_true", help="Print every incumbent"
    )
    run.add_argument("--progress", help="Write the incumbent trace as CSV")
    run.add_argument("--out", help="Write the final solution as JSON")
    run.add_argument("--report", help="Write the run report as JSON")
    run.add_argument(
        "-s", "--stats", action="store_true", help="Print search statistics"
    )
    run.add_argument(
        "--branching", choices=BRANCHING_STRATEGIES, default="largest_volume"
    )
    run.add_argument(
        "--no-item-symmetry",
        action="store_true",
        help="Do not order identical items",
    )

    check = commands.add_parser("check", help="Validate a solution file")
    _add_instance_arguments(check)
    check.add_argument("solution", help="Solution JSON to validate")

    summary = commands.add_parser("summarize", help="Aggregate run reports per suite")
    summary.add_argument("reports", nargs="+", help="Run report JSON files")

    bench = commands.add_parser("bench", help="Run every instance of a manifest")
    bench.add_argument("--manifest", required=True, help="YAML bench manifest")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )

    if args.command == "run":
        return cmd_run(
            args.suite,
            args.index,
            time_limit_ms=args.time_limit,
            workers=args.workers,
            seed=args.seed,
            emit_all=args.emit_all,
            progress=args.progress,
            out=args.out,
            report=args.report,
            show_stats=args.stats,
            branching=args.branching,
            item_symmetry=not args.no_item_symmetry,
        )
    if args.command == "check":
        return cmd_check(args.suite, args.index, args.solution)
    if args.command == "summarize":
        return cmd_summarize(args.reports)
    return cmd_bench(args.manifest)


if __name__ == "__main__":
    sys.exit(main())
