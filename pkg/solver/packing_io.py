import csv
import io
import json
import logging
from config import PROGRESS_CSV_HEADER
from dataclasses import dataclass, field
from dataclasses_json import (
    DataClassJsonMixin,
    Undefined,
    config as json_config,
    dataclass_json,
)
from model import (
    Container,
    Instance,
    InvalidInstanceError,
    ItemClass,
    Placement,
    Rotation,
    Solution,
    SolveStats,
    Violation,
    oriented_size,
    validate,
    volume_utilization,
)
from typing import Iterator, List, NamedTuple, Optional, Tuple

LOG = logging.getLogger(__name__)


class ThpackParseError(Exception):
    line: int
    instance_index: Optional[int]
    message: str

    def __init__(
        self, line: int, instance_index: Optional[int], message: str
    ) -> None:
        where = f"line {line}"
        if instance_index is not None:
            where += f", instance {instance_index}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.instance_index = instance_index
        self.message = message


class DocumentFormatError(Exception):
    message: str

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message


class InvalidSolutionError(Exception):
    violations: List[Violation]

    def __init__(self, violations: List[Violation]) -> None:
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = violations


@dataclass
class ThpackSuite:
    name: str
    instances: List[Instance]
    # PRNG seeds of the generator, kept for fidelity but unused by the solver
    seeds: List[Optional[int]]


@dataclass
class ProgressRecord:
    elapsed: float
    objective: int
    left_boxes: int
    volume_utilization: float


class _Token(NamedTuple):
    text: str
    line: int


class _TokenStream:
    def __init__(self, text: str) -> None:
        self._tokens: List[_Token] = [
            _Token(word, number)
            for number, line in enumerate(text.splitlines(), start=1)
            for word in line.split()
        ]
        self._cursor = 0
        self._last_line = len(text.splitlines())
        self.instance_index: Optional[int] = None

    def peek(self) -> Optional[_Token]:
        if self._cursor < len(self._tokens):
            return self._tokens[self._cursor]
        return None

    def next_int(self, what: str) -> Tuple[int, int]:
        token = self.peek()
        if token is None:
            raise ThpackParseError(
                self._last_line,
                self.instance_index,
                f"unexpected end of file, expected {what}",
            )
        self._cursor += 1
        try:
            return int(token.text), token.line
        except ValueError as e:
            raise ThpackParseError(
                token.line, self.instance_index, f"malformed {what}: {token.text!r}"
            ) from e

    def positive(self, what: str) -> int:
        value, line = self.next_int(what)
        if value < 1:
            raise ThpackParseError(
                line, self.instance_index, f"{what} must be positive, got {value}"
            )
        return value

    def flag(self, what: str) -> bool:
        value, line = self.next_int(what)
        if value not in (0, 1):
            raise ThpackParseError(
                line, self.instance_index, f"{what} must be 0 or 1, got {value}"
            )
        return value == 1

    def exhausted(self) -> bool:
        return self._cursor >= len(self._tokens)


def parse_thpack(text: str, suite_name: str = "thpack") -> ThpackSuite:
    """Reads an OR-Library thpack file.

    Dimensions are read in file order (L, W, H) and stored with W on axis 0, L on
    axis 1 and H on axis 2; every vertical flag follows its dimension. Tokens may be
    separated by any run of blanks or newlines, except that the optional seed must
    share the line of its case index.
    """
    stream = _TokenStream(text)
    cases = stream.positive("number of cases")

    instances: List[Instance] = []
    seeds: List[Optional[int]] = []
    for position in range(1, cases + 1):
        stream.instance_index = position
        label, label_line = stream.next_int("case index")
        if label != position:
            LOG.warning(
                "%s: case on line %d is labelled %d, using position %d",
                suite_name,
                label_line,
                label,
                position,
            )
        seed: Optional[int] = None
        following = stream.peek()
        if following is not None and following.line == label_line:
            seed, _ = stream.next_int("seed")
        seeds.append(seed)

        length = stream.positive("container length")
        width = stream.positive("container width")
        height = stream.positive("container height")
        class_count = stream.positive("number of classes")

        classes: List[ItemClass] = []
        for _ in range(class_count):
            stream.next_int("class index")
            l = stream.positive("item length")
            vl = stream.flag("length vertical flag")
            w = stream.positive("item width")
            vw = stream.flag("width vertical flag")
            h = stream.positive("item height")
            vh = stream.flag("height vertical flag")
            count, count_line = stream.next_int("class count")
            if count < 1:
                raise ThpackParseError(
                    count_line, position, f"class count must be positive, got {count}"
                )
            if not (vl or vw or vh):
                raise ThpackParseError(
                    count_line, position, "class has no vertical dimension"
                )
            classes.append(
                ItemClass(dims=(w, l, h), vertical_ok=(vw, vl, vh), count=count)
            )

        instances.append(
            Instance(
                container=Container((width, length, height)),
                classes=tuple(classes),
                name=f"{suite_name}_{position:03d}",
            )
        )

    if not stream.exhausted():
        token = stream.peek()
        assert token is not None
        raise ThpackParseError(
            token.line, None, f"trailing data after {cases} cases: {token.text!r}"
        )

    return ThpackSuite(name=suite_name, instances=instances, seeds=seeds)


def read_thpack_file(path: str) -> ThpackSuite:
    suite_name = path.replace("\\", "/").rsplit("/", 1)[-1].split(".", 1)[0]
    with open(path, "r", encoding="ascii") as f:
        return parse_thpack(f.read(), suite_name)


@dataclass_json
@dataclass
class ClassRecord(DataClassJsonMixin):
    dims: List[int]
    vertical_ok: List[bool]
    count: int


@dataclass_json
@dataclass
class InstanceDocument(DataClassJsonMixin):
    name: str
    container: List[int]
    classes: List[ClassRecord]


@dataclass_json
@dataclass
class PlacementRecord(DataClassJsonMixin):
    item: int
    class_index: int = field(metadata=json_config(field_name="class"))
    pos: List[int]
    size: List[int]
    rotation: List[int]


@dataclass_json(undefined=Undefined.EXCLUDE)
@dataclass
class StatsRecord(DataClassJsonMixin):
    nodes_explored: int = 0
    propagations: int = 0
    solutions_found: int = 0
    wall_time_s: float = 0.0
    proved_optimal: bool = False

    @staticmethod
    def from_stats(stats: SolveStats) -> "StatsRecord":
        return StatsRecord(
            nodes_explored=stats.nodes_explored,
            propagations=stats.propagations,
            solutions_found=stats.solutions_found,
            wall_time_s=round(stats.wall_time, 6),
            proved_optimal=stats.proved_optimal,
        )

    def to_stats(self) -> SolveStats:
        return SolveStats(
            nodes_explored=self.nodes_explored,
            propagations=self.propagations,
            solutions_found=self.solutions_found,
            wall_time=self.wall_time_s,
            proved_optimal=self.proved_optimal,
        )


@dataclass_json
@dataclass
class SolutionDocument(DataClassJsonMixin):
    instance: str
    container: List[int]
    placements: List[PlacementRecord]
    unpacked: List[int]
    objective: int
    volume_utilization: float
    left_boxes: int
    stats: StatsRecord


def write_instance_json(instance: Instance) -> str:
    document = InstanceDocument(
        name=instance.name,
        container=list(instance.container.dims),
        classes=[
            ClassRecord(list(c.dims), list(c.vertical_ok), c.count)
            for c in instance.classes
        ],
    )
    return document.to_json(indent=2)


def read_instance_json(text: str) -> Instance:
    try:
        document = InstanceDocument.from_json(text)
        return Instance(
            container=Container(_triple(document.container)),
            classes=tuple(
                ItemClass(
                    dims=_triple(c.dims),
                    vertical_ok=(
                        bool(c.vertical_ok[0]),
                        bool(c.vertical_ok[1]),
                        bool(c.vertical_ok[2]),
                    ),
                    count=c.count,
                )
                for c in document.classes
            ),
            name=document.name,
        )
    except (KeyError, TypeError, ValueError, IndexError, InvalidInstanceError) as e:
        raise DocumentFormatError(f"malformed instance document: {e}") from e


def write_solution_json(
    instance: Instance, solution: Solution, stats: SolveStats
) -> str:
    violations = validate(instance, solution)
    if violations:
        raise InvalidSolutionError(violations)

    document = SolutionDocument(
        instance=instance.name,
        container=list(instance.container.dims),
        placements=[
            PlacementRecord(
                item=p.item_index,
                class_index=p.class_index,
                pos=list(p.pos),
                size=list(oriented_size(instance.classes[p.class_index], p.rotation)),
                rotation=list(p.rotation.perm),
            )
            for p in solution.placed
        ],
        unpacked=list(solution.unpacked_counts),
        objective=solution.objective,
        volume_utilization=volume_utilization(instance, solution),
        left_boxes=solution.left_boxes,
        stats=StatsRecord.from_stats(stats),
    )
    return document.to_json(indent=2)


def read_solution_json(text: str) -> Tuple[Solution, SolutionDocument]:
    """Parses a solution document; stored header fields are kept as written so a
    tampered objective stays visible to `validate`."""
    try:
        document = SolutionDocument.from_json(text)
        placed = [
            Placement(
                item_index=int(record.item),
                class_index=int(record.class_index),
                rotation=Rotation(_triple(record.rotation)),
                pos=_triple(record.pos),
            )
            for record in document.placements
        ]
        solution = Solution(
            placed=tuple(placed),
            unpacked_counts=tuple(int(c) for c in document.unpacked),
            objective=int(document.objective),
        )
    except json.JSONDecodeError as e:
        raise DocumentFormatError(f"not a JSON document: {e}") from e
    except (KeyError, TypeError, ValueError, AttributeError, InvalidInstanceError) as e:
        raise DocumentFormatError(f"malformed solution document: {e}") from e
    return solution, document


def consistency_violations(
    instance: Instance, solution: Solution, document: SolutionDocument
) -> List[Violation]:
    """Checks the derived fields of a solution document against recomputation."""
    violations: List[Violation] = []
    if document.instance != instance.name:
        violations.append(
            Violation(
                "consistency",
                (),
                f"document is for {document.instance!r}, not {instance.name!r}",
            )
        )
    if tuple(document.container) != instance.container.dims:
        violations.append(
            Violation(
                "consistency",
                (),
                f"container {document.container} != {list(instance.container.dims)}",
            )
        )
    for record, placement in zip(document.placements, solution.placed):
        if not 0 <= placement.class_index < len(instance.classes):
            continue
        expected = oriented_size(
            instance.classes[placement.class_index], placement.rotation
        )
        if tuple(record.size) != expected:
            violations.append(
                Violation(
                    "consistency",
                    (placement.item_index,),
                    f"size {record.size} does not match rotation, expected"
                    f" {list(expected)}",
                )
            )
    if document.volume_utilization != volume_utilization(instance, solution):
        violations.append(
            Violation(
                "consistency",
                (),
                f"volume utilization {document.volume_utilization} !="
                f" {volume_utilization(instance, solution)}",
            )
        )
    if document.left_boxes != solution.left_boxes:
        violations.append(
            Violation(
                "consistency",
                (),
                f"left boxes {document.left_boxes} != {solution.left_boxes}",
            )
        )
    return violations


def progress_record(
    instance: Instance, solution: Solution, elapsed: float
) -> ProgressRecord:
    return ProgressRecord(
        elapsed=elapsed,
        objective=solution.objective,
        left_boxes=solution.left_boxes,
        volume_utilization=volume_utilization(instance, solution),
    )


def write_progress_csv(records: List[ProgressRecord]) -> str:
    out = io.StringIO()
    out.write(PROGRESS_CSV_HEADER + "\n")
    writer = csv.writer(out, lineterminator="\n")
    for record in records:
        writer.writerow(
            [
                f"{record.elapsed:.3f}",
                record.objective,
                record.left_boxes,
                f"{record.volume_utilization:.4f}",
            ]
        )
    return out.getvalue()


def iter_progress_csv(text: str) -> Iterator[ProgressRecord]:
    reader = csv.reader(io.StringIO(text))
    next(reader, None)
    for row in reader:
        yield ProgressRecord(
            elapsed=float(row[0]),
            objective=int(row[1]),
            left_boxes=int(row[2]),
            volume_utilization=float(row[3]),
        )


def _triple(values: List[int]) -> Tuple[int, int, int]:
    if len(values) != 3:
        raise ValueError(f"expected three values, got {values}")
    return (int(values[0]), int(values[1]), int(values[2]))
