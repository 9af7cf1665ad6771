from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Dict, List, Sequence, Tuple

# Axis 2 is the vertical (height) axis everywhere.
VERTICAL_AXIS = 2
AXES = (0, 1, 2)

Triple = Tuple[int, int, int]


class InvalidInstanceError(Exception):
    message: str

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message


@dataclass(frozen=True)
class Container:
    dims: Triple

    def __post_init__(self) -> None:
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise InvalidInstanceError(f"container dims must be positive: {self.dims}")

    @property
    def volume(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]


@dataclass(frozen=True)
class ItemClass:
    dims: Triple
    vertical_ok: Tuple[bool, bool, bool]
    count: int

    def __post_init__(self) -> None:
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise InvalidInstanceError(f"item dims must be positive: {self.dims}")
        if len(self.vertical_ok) != 3 or not any(self.vertical_ok):
            raise InvalidInstanceError(
                f"item must have at least one vertical dimension: {self.vertical_ok}"
            )
        if self.count < 1:
            raise InvalidInstanceError(f"class count must be positive: {self.count}")

    @property
    def volume(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]


@dataclass(frozen=True)
class Instance:
    container: Container
    classes: Tuple[ItemClass, ...]
    name: str = ""

    def __post_init__(self) -> None:
        if not self.classes:
            raise InvalidInstanceError("instance needs at least one item class")

    @property
    def item_count(self) -> int:
        return sum(c.count for c in self.classes)

    @property
    def payload_volume(self) -> int:
        return sum(c.count * c.volume for c in self.classes)

    @property
    def class_offsets(self) -> List[int]:
        """First item index of every class; items of a class are contiguous."""
        offsets = []
        total = 0
        for item_class in self.classes:
            offsets.append(total)
            total += item_class.count
        return offsets

    def file_dims(self) -> Triple:
        """Container dimensions in thpack file order (L, W, H)."""
        width, length, height = self.container.dims
        return (length, width, height)


@dataclass(frozen=True, order=True)
class Rotation:
    # perm[u] is the intrinsic item dimension lying along container axis u
    perm: Triple

    def __post_init__(self) -> None:
        if sorted(self.perm) != [0, 1, 2]:
            raise InvalidInstanceError(f"rotation is not a permutation: {self.perm}")


# Lexicographic permutation order, used for every rotation tie-break.
ALL_ROTATIONS: Tuple[Rotation, ...] = tuple(
    Rotation(perm) for perm in permutations(AXES)  # type: ignore[arg-type]
)
IDENTITY = ALL_ROTATIONS[0]


@dataclass(frozen=True)
class Placement:
    item_index: int
    class_index: int
    rotation: Rotation
    pos: Triple


@dataclass(frozen=True)
class Solution:
    placed: Tuple[Placement, ...]
    unpacked_counts: Tuple[int, ...]
    objective: int

    @staticmethod
    def from_placements(instance: Instance, placed: Sequence[Placement]) -> "Solution":
        packed = [0] * len(instance.classes)
        for placement in placed:
            packed[placement.class_index] += 1
        unpacked = tuple(
            item_class.count - packed[k]
            for k, item_class in enumerate(instance.classes)
        )
        objective = sum(
            unpacked[k] * item_class.volume
            for k, item_class in enumerate(instance.classes)
        )
        ordered = tuple(sorted(placed, key=lambda p: p.item_index))
        return Solution(placed=ordered, unpacked_counts=unpacked, objective=objective)

    @staticmethod
    def empty(instance: Instance) -> "Solution":
        return Solution.from_placements(instance, [])

    @property
    def left_boxes(self) -> int:
        return sum(self.unpacked_counts)


@dataclass
class SolveStats:
    nodes_explored: int = 0
    propagations: int = 0
    solutions_found: int = 0
    wall_time: float = 0.0
    proved_optimal: bool = False


@dataclass(frozen=True)
class Violation:
    constraint: str
    items: Tuple[int, ...] = field(default_factory=tuple)
    message: str = ""

    def __str__(self) -> str:
        items = ",".join(str(i) for i in self.items)
        return f"{self.constraint} [{items}]: {self.message}"


def allowed_rotations(item_class: ItemClass) -> Tuple[Rotation, ...]:
    return tuple(
        r for r in ALL_ROTATIONS if item_class.vertical_ok[r.perm[VERTICAL_AXIS]]
    )


def oriented_size(item_class: ItemClass, rotation: Rotation) -> Triple:
    dims = item_class.dims
    perm = rotation.perm
    return (dims[perm[0]], dims[perm[1]], dims[perm[2]])


def overlap(a: Placement, b: Placement, sizes_a: Triple, sizes_b: Triple) -> bool:
    return boxes_overlap(a.pos, sizes_a, b.pos, sizes_b)


def boxes_overlap(
    pos_a: Triple, sizes_a: Triple, pos_b: Triple, sizes_b: Triple
) -> bool:
    # A zero-length side separates trivially: a <= b <= a + 0 on that axis.
    for u in AXES:
        if pos_a[u] + sizes_a[u] <= pos_b[u] or pos_b[u] + sizes_b[u] <= pos_a[u]:
            return False
    return True


def contains(container: Container, pos: Sequence[int], sizes: Sequence[int]) -> bool:
    return all(0 <= pos[u] and pos[u] + sizes[u] <= container.dims[u] for u in AXES)


def placement_size(instance: Instance, placement: Placement) -> Triple:
    return oriented_size(instance.classes[placement.class_index], placement.rotation)


def packed_volume(instance: Instance, solution: Solution) -> int:
    return sum(instance.classes[p.class_index].volume for p in solution.placed)


def leftover_volume(instance: Instance, solution: Solution) -> int:
    return sum(
        solution.unpacked_counts[k] * item_class.volume
        for k, item_class in enumerate(instance.classes)
    )


def volume_utilization(instance: Instance, solution: Solution) -> float:
    return packed_volume(instance, solution) / instance.container.volume


def validate(instance: Instance, solution: Solution) -> List[Violation]:
    violations: List[Violation] = []
    num_classes = len(instance.classes)
    offsets = instance.class_offsets
    seen: Dict[int, Placement] = {}
    packed = [0] * num_classes

    usable: List[Placement] = []
    for p in solution.placed:
        if not 0 <= p.class_index < num_classes:
            violations.append(
                Violation(
                    "cardinality",
                    (p.item_index,),
                    f"class index {p.class_index} out of range",
                )
            )
            continue
        item_class = instance.classes[p.class_index]
        first = offsets[p.class_index]
        if not first <= p.item_index < first + item_class.count:
            violations.append(
                Violation(
                    "cardinality",
                    (p.item_index,),
                    f"item does not belong to class {p.class_index}",
                )
            )
        if p.item_index in seen:
            violations.append(
                Violation("cardinality", (p.item_index,), "item placed twice")
            )
        seen[p.item_index] = p
        packed[p.class_index] += 1
        usable.append(p)

        if p.rotation not in allowed_rotations(item_class):
            violations.append(
                Violation(
                    "rotation",
                    (p.item_index,),
                    f"rotation {p.rotation.perm} puts a non-vertical dimension upright",
                )
            )
        sizes = oriented_size(item_class, p.rotation)
        if not contains(instance.container, p.pos, sizes):
            violations.append(
                Violation(
                    "containment",
                    (p.item_index,),
                    f"item at {p.pos} exceeds container {instance.container.dims}",
                )
            )

    for a, b in combinations(usable, 2):
        if overlap(a, b, placement_size(instance, a), placement_size(instance, b)):
            violations.append(
                Violation(
                    "overlap",
                    (a.item_index, b.item_index),
                    f"items at {a.pos} and {b.pos} intersect",
                )
            )

    if len(solution.unpacked_counts) != num_classes:
        violations.append(
            Violation(
                "cardinality",
                (),
                f"{len(solution.unpacked_counts)} unpacked counts for"
                f" {num_classes} classes",
            )
        )
    else:
        for k, item_class in enumerate(instance.classes):
            unpacked = solution.unpacked_counts[k]
            if unpacked < 0 or packed[k] + unpacked != item_class.count:
                violations.append(
                    Violation(
                        "cardinality",
                        (),
                        f"class {k}: {packed[k]} packed + {unpacked} unpacked !="
                        f" {item_class.count}",
                    )
                )
        expected = leftover_volume(instance, solution)
        if solution.objective != expected:
            violations.append(
                Violation(
                    "objective",
                    (),
                    f"objective {solution.objective} != leftover volume {expected}",
                )
            )

    return violations
