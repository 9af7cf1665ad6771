import logging
from collections import deque
from enum import Enum
from model import (
    AXES,
    Instance,
    Placement,
    Rotation,
    Solution,
    SolveStats,
    Triple,
    allowed_rotations,
    oriented_size,
)
from typing import Deque, FrozenSet, Iterable, List, Optional, Set, Tuple

LOG = logging.getLogger(__name__)


class Status(Enum):
    Undecided = "undecided"
    Packed = "packed"
    Excluded = "excluded"


class Outcome(Enum):
    Stable = "stable"
    Failed = "failed"


def resolve_classes(instance: Instance) -> List[int]:
    """Increasing + GlobalCardinality leave exactly one class vector: the sorted one."""
    classes: List[int] = []
    for k, item_class in enumerate(instance.classes):
        classes.extend([k] * item_class.count)
    return classes


class DomainStore:
    """Interval domains of realized positions, rotation candidates and packing status.

    Bounds are kept in flat lists, the entry of item `i` on axis `u` lives at
    `3 * i + u`, so copying a store on branching is a handful of list slices.
    """

    class_of: Tuple[int, ...]
    pos_lo: List[int]
    pos_hi: List[int]
    rotations: List[Tuple[Rotation, ...]]
    status: List[Status]
    packed_counts: List[int]
    excluded_counts: List[int]
    failed: bool
    item_symmetry: bool
    touched: Set[int]
    # placements of one packed item already handed to sibling branches
    covered: Optional[Tuple[int, FrozenSet[Tuple[Triple, Triple]]]]

    def __init__(self, instance: Instance, item_symmetry: bool = True) -> None:
        self.class_of = tuple(resolve_classes(instance))
        n = len(self.class_of)
        dims = instance.container.dims
        self.pos_lo = [0] * (3 * n)
        self.pos_hi = list(dims) * n
        self.rotations = [allowed_rotations(instance.classes[k]) for k in self.class_of]
        self.status = [Status.Undecided] * n
        self.packed_counts = [0] * len(instance.classes)
        self.excluded_counts = [0] * len(instance.classes)
        self.failed = False
        self.item_symmetry = item_symmetry
        self.touched = set()
        self.covered = None

    def __len__(self) -> int:
        return len(self.class_of)

    def copy(self) -> "DomainStore":
        other = DomainStore.__new__(DomainStore)
        other.class_of = self.class_of
        other.pos_lo = self.pos_lo[:]
        other.pos_hi = self.pos_hi[:]
        other.rotations = self.rotations[:]
        other.status = self.status[:]
        other.packed_counts = self.packed_counts[:]
        other.excluded_counts = self.excluded_counts[:]
        other.failed = self.failed
        other.item_symmetry = self.item_symmetry
        other.touched = set()
        other.covered = self.covered
        return other

    def snapshot(self) -> tuple:
        return (
            tuple(self.pos_lo),
            tuple(self.pos_hi),
            tuple(self.rotations),
            tuple(self.status),
            tuple(self.packed_counts),
            tuple(self.excluded_counts),
            self.failed,
            self.covered,
        )

    def lo(self, i: int) -> Triple:
        b = 3 * i
        return (self.pos_lo[b], self.pos_lo[b + 1], self.pos_lo[b + 2])

    def hi(self, i: int) -> Triple:
        b = 3 * i
        return (self.pos_hi[b], self.pos_hi[b + 1], self.pos_hi[b + 2])

    def pack(self, i: int) -> None:
        assert self.status[i] is Status.Undecided
        self.status[i] = Status.Packed
        self.packed_counts[self.class_of[i]] += 1
        self.touched.add(i)

    def exclude(self, i: int) -> None:
        assert self.status[i] is Status.Undecided
        self.status[i] = Status.Excluded
        self.excluded_counts[self.class_of[i]] += 1
        self.touched.add(i)

    def fix_position(self, i: int, u: int, value: int) -> None:
        self.pos_lo[3 * i + u] = value
        self.pos_hi[3 * i + u] = value
        self.touched.add(i)

    def raise_lower(self, i: int, u: int, value: int) -> None:
        self.pos_lo[3 * i + u] = max(self.pos_lo[3 * i + u], value)
        self.touched.add(i)

    def fix_rotation(self, i: int, rotation: Rotation) -> None:
        assert rotation in self.rotations[i]
        self.rotations[i] = (rotation,)
        self.touched.add(i)

    def min_sizes(self, instance: Instance, i: int) -> Triple:
        item_class = instance.classes[self.class_of[i]]
        sizes = [oriented_size(item_class, r) for r in self.rotations[i]]
        return (
            min(s[0] for s in sizes),
            min(s[1] for s in sizes),
            min(s[2] for s in sizes),
        )

    def position_fixed(self, i: int) -> bool:
        b = 3 * i
        return (
            self.pos_lo[b] == self.pos_hi[b]
            and self.pos_lo[b + 1] == self.pos_hi[b + 1]
            and self.pos_lo[b + 2] == self.pos_hi[b + 2]
        )

    def is_fixed(self, i: int) -> bool:
        return self.position_fixed(i) and len(self.rotations[i]) == 1

    def packed_items(self) -> List[int]:
        return [i for i, s in enumerate(self.status) if s is Status.Packed]

    def undecided_items(self) -> List[int]:
        return [i for i, s in enumerate(self.status) if s is Status.Undecided]

    def fully_assigned(self) -> bool:
        return all(
            s is Status.Excluded or (s is Status.Packed and self.is_fixed(i))
            for i, s in enumerate(self.status)
        )

    def packed_fixed(self) -> bool:
        return all(
            s is not Status.Packed or self.is_fixed(i)
            for i, s in enumerate(self.status)
        )

    def packed_volume(self, instance: Instance) -> int:
        return sum(
            c.volume * n for c, n in zip(instance.classes, self.packed_counts)
        )

    def undecided_volume(self, instance: Instance) -> int:
        return sum(
            c.volume * (c.count - packed - excluded)
            for c, packed, excluded in zip(
                instance.classes, self.packed_counts, self.excluded_counts
            )
        )

    def to_solution(self, instance: Instance) -> Solution:
        """Solution made of the fixed packed items; every other item is left out."""
        placed = [
            Placement(
                item_index=i,
                class_index=self.class_of[i],
                rotation=self.rotations[i][0],
                pos=self.lo(i),
            )
            for i, s in enumerate(self.status)
            if s is Status.Packed and self.is_fixed(i)
        ]
        return Solution.from_placements(instance, placed)

    def ledger_consistent(self, instance: Instance) -> bool:
        packed = [0] * len(instance.classes)
        excluded = [0] * len(instance.classes)
        for i, s in enumerate(self.status):
            if s is Status.Packed:
                packed[self.class_of[i]] += 1
            elif s is Status.Excluded:
                excluded[self.class_of[i]] += 1
        return (
            packed == self.packed_counts
            and excluded == self.excluded_counts
            and all(
                p + e <= c.count
                for p, e, c in zip(packed, excluded, instance.classes)
            )
        )


def _dead(store: DomainStore, i: int) -> bool:
    # An undecided item that cannot fit is forced out; a packed one fails the store.
    if store.status[i] is Status.Packed:
        store.failed = True
    else:
        store.exclude(i)
    return True


def prune_containment(store: DomainStore, instance: Instance, item: int) -> bool:
    if store.status[item] is Status.Excluded:
        return False
    dims = instance.container.dims
    item_class = instance.classes[store.class_of[item]]
    lo, hi = store.pos_lo, store.pos_hi
    b = 3 * item
    changed = False

    for u in AXES:
        if lo[b + u] < 0:
            lo[b + u] = 0
            changed = True

    fitting = tuple(
        r
        for r in store.rotations[item]
        if all(
            lo[b + u] + size <= dims[u]
            for u, size in enumerate(oriented_size(item_class, r))
        )
    )
    if not fitting:
        return _dead(store, item)
    if len(fitting) != len(store.rotations[item]):
        store.rotations[item] = fitting
        changed = True

    sizes = [oriented_size(item_class, r) for r in fitting]
    for u in AXES:
        cap = dims[u] - min(s[u] for s in sizes)
        if hi[b + u] > cap:
            hi[b + u] = cap
            changed = True
        if lo[b + u] > hi[b + u]:
            return _dead(store, item)

    return changed


def _forced_overlap(
    lo_i: int, hi_i: int, s_i: int, lo_j: int, hi_j: int, s_j: int
) -> bool:
    # Compulsory part of an interval of length s starting in [lo, hi] is [hi, lo + s).
    if hi_i >= lo_i + s_i or hi_j >= lo_j + s_j:
        return False
    return max(hi_i, hi_j) < min(lo_i + s_i, lo_j + s_j)


def prune_nonoverlap(store: DomainStore, instance: Instance, i: int, j: int) -> bool:
    if store.status[i] is not Status.Packed or store.status[j] is not Status.Packed:
        return False
    s_i = store.min_sizes(instance, i)
    s_j = store.min_sizes(instance, j)
    if 0 in s_i or 0 in s_j:
        return False

    lo, hi = store.pos_lo, store.pos_hi
    bi, bj = 3 * i, 3 * j
    free_axes = [
        u
        for u in AXES
        if not _forced_overlap(
            lo[bi + u], hi[bi + u], s_i[u], lo[bj + u], hi[bj + u], s_j[u]
        )
    ]
    if not free_axes:
        store.failed = True
        return True
    if len(free_axes) > 1:
        return False

    v = free_axes[0]
    i_first = lo[bi + v] + s_i[v] <= hi[bj + v]
    j_first = lo[bj + v] + s_j[v] <= hi[bi + v]
    if not i_first and not j_first:
        store.failed = True
        return True

    changed = False
    if i_first and not j_first:
        changed |= _tighten(store, bi + v, bj + v, s_i[v])
    elif j_first and not i_first:
        changed |= _tighten(store, bj + v, bi + v, s_j[v])
    return changed


def _tighten(store: DomainStore, first: int, second: int, size_first: int) -> bool:
    # `first` ends before `second` starts on this axis.
    changed = False
    lo, hi = store.pos_lo, store.pos_hi
    if lo[second] < lo[first] + size_first:
        lo[second] = lo[first] + size_first
        changed = True
    if hi[first] > hi[second] - size_first:
        hi[first] = hi[second] - size_first
        changed = True
    return changed


def prune_covered(store: DomainStore, instance: Instance) -> bool:
    """Drops orientations of the covered item that would repeat a placement already
    explored by a sibling branch once its position is fixed."""
    if store.covered is None:
        return False
    i, ruled_out = store.covered
    if store.status[i] is not Status.Packed or not store.position_fixed(i):
        return False
    pos = store.lo(i)
    item_class = instance.classes[store.class_of[i]]
    left = tuple(
        r
        for r in store.rotations[i]
        if (pos, oriented_size(item_class, r)) not in ruled_out
    )
    if not left:
        store.failed = True
        return True
    if len(left) == len(store.rotations[i]):
        return False
    store.rotations[i] = left
    return True


def prune_item_symmetry(store: DomainStore, i: int, j: int) -> bool:
    """Same-class items i < j: j packed implies i packed, and packed positions are
    lexicographically ordered."""
    status_i, status_j = store.status[i], store.status[j]
    if status_i is Status.Excluded and status_j is not Status.Excluded:
        if status_j is Status.Packed:
            store.failed = True
        else:
            store.exclude(j)
        return True
    if status_j is Status.Packed and status_i is not Status.Packed:
        if status_i is Status.Excluded:
            store.failed = True
        else:
            store.pack(i)
        return True
    if status_i is not Status.Packed or status_j is not Status.Packed:
        return False

    lo, hi = store.pos_lo, store.pos_hi
    changed = False
    for u in AXES:
        a, b = 3 * i + u, 3 * j + u
        if lo[b] < lo[a]:
            lo[b] = lo[a]
            changed = True
        if hi[a] > hi[b]:
            hi[a] = hi[b]
            changed = True
        if lo[a] > hi[a] or lo[b] > hi[b]:
            store.failed = True
            return True
        if not lo[a] == hi[a] == lo[b] == hi[b]:
            break
    return changed


def _symmetry_neighbours(store: DomainStore, i: int) -> Iterable[Tuple[int, int]]:
    k = store.class_of[i]
    if i > 0 and store.class_of[i - 1] == k:
        yield (i - 1, i)
    if i + 1 < len(store) and store.class_of[i + 1] == k:
        yield (i, i + 1)


def propagate_fixpoint(
    store: DomainStore,
    instance: Instance,
    stats: Optional[SolveStats] = None,
    items: Optional[Iterable[int]] = None,
) -> Outcome:
    """Runs the propagators over a worklist of items until nothing changes.

    `items` seeds the worklist, every item when omitted.
    """
    if store.failed:
        return Outcome.Failed
    stats = stats if stats is not None else SolveStats()

    queue: Deque[int] = deque(sorted(items) if items is not None else range(len(store)))
    queued = set(queue)
    while queue:
        i = queue.popleft()
        queued.discard(i)
        touched: Set[int] = set()

        stats.propagations += 1
        if prune_containment(store, instance, i):
            touched.add(i)
        if store.failed:
            return Outcome.Failed
        if store.covered is not None and store.covered[0] == i:
            stats.propagations += 1
            if prune_covered(store, instance):
                touched.add(i)
            if store.failed:
                return Outcome.Failed

        if store.status[i] is Status.Packed:
            for j in store.packed_items():
                if j == i:
                    continue
                stats.propagations += 1
                if prune_nonoverlap(store, instance, i, j):
                    if store.failed:
                        return Outcome.Failed
                    touched.update((i, j))

        if store.item_symmetry:
            for a, b in _symmetry_neighbours(store, i):
                stats.propagations += 1
                if prune_item_symmetry(store, a, b):
                    if store.failed:
                        return Outcome.Failed
                    touched.update((a, b))

        for t in sorted(touched):
            if t not in queued:
                queue.append(t)
                queued.add(t)

    if not store.ledger_consistent(instance):
        store.failed = True
        return Outcome.Failed
    store.touched = set()
    return Outcome.Stable
