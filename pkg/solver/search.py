import logging
import multiprocessing
import queue
import random
import threading
import time
from concurrent.futures import FIRST_COMPLETED, Future, ProcessPoolExecutor, wait
from dataclasses import dataclass
from itertools import product
from model import (
    AXES,
    Instance,
    ItemClass,
    Placement,
    Rotation,
    Solution,
    SolveStats,
    Triple,
    allowed_rotations,
    boxes_overlap,
    oriented_size,
)
from propagate import DomainStore, Outcome, Status, propagate_fixpoint
from search_config import SearchConfig
from typing import (
    Any,
    Callable,
    Iterable,
    Iterator,
    List,
    Optional,
    Protocol,
    Sequence,
    Set,
    Tuple,
)

LOG = logging.getLogger(__name__)

# Subtrees handed out per worker when the search runs in parallel.
FRONTIER_PER_WORKER = 4
# How often the parallel search collects incumbents from its workers.
POLL_INTERVAL_S = 0.05

# A placed box: position and oriented sizes.
Box = Tuple[Triple, Triple]
PointKey = Callable[[Triple], Tuple[int, int, int]]


def wall_first(point: Triple) -> Tuple[int, int, int]:
    return point


def floor_first(point: Triple) -> Tuple[int, int, int]:
    return (point[2], point[1], point[0])


def _largest_footprint(item_class: ItemClass) -> int:
    return max(
        s[0] * s[1]
        for s in (oriented_size(item_class, r) for r in allowed_rotations(item_class))
    )


# First-fit dives run before the tree search: item order and where to look first.
DIVES: Tuple[Tuple[str, Callable[[ItemClass], Any], PointKey], ...] = (
    ("volume/floor", lambda c: -c.volume, floor_first),
    ("volume/wall", lambda c: -c.volume, wall_first),
    ("footprint/floor", lambda c: (-_largest_footprint(c), -c.volume), floor_first),
    ("longest/wall", lambda c: (-max(c.dims), -c.volume), wall_first),
)


@dataclass(frozen=True)
class Incumbent:
    solution: Solution
    # seconds since the solve started
    found_at: float


IncumbentSink = Callable[[Incumbent], None]


def lower_bound(
    store: DomainStore, instance: Instance, packed_volume: Optional[int] = None
) -> int:
    """Smallest objective any completion of `store` can reach."""
    if packed_volume is None:
        packed_volume = store.packed_volume(instance)
    free = instance.container.volume - packed_volume
    best_case = min(max(free, 0), store.undecided_volume(instance))
    return max(instance.payload_volume - packed_volume - best_case, 0)


def normal_patterns(instance: Instance) -> List[Tuple[int, int, int]]:
    """Per class and axis, a bitset of the coordinates an item can take in some
    compacted packing: sums of sizes of the other items along that axis.

    Any feasible packing can be pushed towards the origin until every item touches
    the container wall or another item on each axis, and such coordinates are
    always a subset sum of the others' sizes.
    """
    dims = instance.container.dims
    along = [
        [
            {oriented_size(c, r)[u] for r in allowed_rotations(c)}
            for u in AXES
        ]
        for c in instance.classes
    ]
    patterns = []
    for k in range(len(instance.classes)):
        per_axis = []
        for u in AXES:
            mask = (1 << (dims[u] + 1)) - 1
            bits = 1
            for other, item_class in enumerate(instance.classes):
                copies = item_class.count - (1 if other == k else 0)
                for _ in range(copies):
                    grown = bits
                    for size in along[other][u]:
                        grown |= bits << size
                    grown &= mask
                    if grown == bits:
                        break
                    bits = grown
            per_axis.append(bits)
        patterns.append((per_axis[0], per_axis[1], per_axis[2]))
    return patterns


def distinct_shapes(
    item_class: ItemClass, rotations: Iterable[Rotation]
) -> List[Tuple[Rotation, Triple]]:
    """Rotations with their oriented sizes, keeping the first rotation of each size."""
    shapes: List[Tuple[Rotation, Triple]] = []
    seen: Set[Triple] = set()
    for rotation in rotations:
        sizes = oriented_size(item_class, rotation)
        if sizes not in seen:
            seen.add(sizes)
            shapes.append((rotation, sizes))
    return shapes


def extreme_points(boxes: Iterable[Box]) -> Set[Triple]:
    points = {(0, 0, 0)}
    for (x, y, z), (w, l, h) in boxes:
        points.update(((x + w, y, z), (x, y + l, z), (x, y, z + h)))
    return points


def fits(pos: Triple, sizes: Triple, dims: Triple, boxes: Sequence[Box]) -> bool:
    if any(pos[u] + sizes[u] > dims[u] for u in AXES):
        return False
    return not any(boxes_overlap(pos, sizes, other, s) for other, s in boxes)


def _inside(point: Triple, box: Box) -> bool:
    pos, sizes = box
    return all(pos[u] <= point[u] < pos[u] + sizes[u] for u in AXES)


def first_fit(
    instance: Instance,
    order: Sequence[int],
    point_key: PointKey = floor_first,
    should_stop: Optional[Callable[[], bool]] = None,
) -> Solution:
    """Places items of the classes in `order` one by one at the first extreme point
    where they fit, leaving out those that fit nowhere."""
    dims = instance.container.dims
    offsets = instance.class_offsets
    shapes = [distinct_shapes(c, allowed_rotations(c)) for c in instance.classes]
    boxes: List[Box] = []
    points = {(0, 0, 0)}
    placed: List[Placement] = []
    used = [0] * len(instance.classes)
    blocked: Set[int] = set()

    for k in order:
        if k in blocked:
            continue
        if should_stop is not None and should_stop():
            break
        spot = next(
            (
                (point, rotation, sizes)
                for point in sorted(points, key=point_key)
                for rotation, sizes in shapes[k]
                if fits(point, sizes, dims, boxes)
            ),
            None,
        )
        if spot is None:
            blocked.add(k)
            continue
        pos, rotation, sizes = spot
        box = (pos, sizes)
        boxes.append(box)
        placed.append(Placement(offsets[k] + used[k], k, rotation, pos))
        used[k] += 1
        points = {p for p in points if not _inside(p, box)}
        points.update(
            p for p in extreme_points([box]) if all(p[u] < dims[u] for u in AXES)
        )
    return Solution.from_placements(instance, placed)


def dive_order(instance: Instance, key: Callable[[ItemClass], Any]) -> List[int]:
    """Class index of every item, classes sorted by `key` (ties: lowest index)."""
    ranked = sorted(
        range(len(instance.classes)), key=lambda k: (key(instance.classes[k]), k)
    )
    return [k for k in ranked for _ in range(instance.classes[k].count)]


class Brancher:
    """Produces the ordered children of a search node.

    The chosen item is first tried as a whole placement at every extreme point of
    the fixed items where it fits, then left out. A last child keeps it packed with
    those placements ruled out and positions it axis by axis, so together the
    children cover every packing of the node exactly once. Orientations with equal
    sizes count as one placement.
    """

    def __init__(self, instance: Instance, strategy: str = "largest_volume") -> None:
        self._instance = instance
        self._strategy = strategy
        self._patterns = normal_patterns(instance)
        store = DomainStore(instance)
        volumes = [instance.classes[k].volume for k in store.class_of]
        self._by_volume = sorted(range(len(store)), key=lambda i: (-volumes[i], i))

    def select_item(self, store: DomainStore, rng: random.Random) -> Optional[int]:
        if self._strategy == "input_order":
            candidates = store.undecided_items()
            return candidates[0] if candidates else None
        if self._strategy == "random":
            candidates = store.undecided_items()
            return rng.choice(candidates) if candidates else None
        for i in self._by_volume:
            if store.status[i] is Status.Undecided:
                return i
        return None

    def children(self, store: DomainStore, rng: random.Random) -> Iterator[DomainStore]:
        if store.covered is not None:
            yield from self._split(store, store.covered[0])
            return
        pending = next(
            (
                i
                for i, s in enumerate(store.status)
                if s is Status.Packed and not store.is_fixed(i)
            ),
            None,
        )
        if pending is not None:
            covered: List[Box] = []
            yield from self._at_extreme_points(store, pending, covered)
            yield from self._remainder(store, pending, covered)
            return

        item = self.select_item(store, rng)
        if item is None:
            return
        packed = store.copy()
        packed.pack(item)
        covered = []
        yield from self._at_extreme_points(packed, item, covered)
        left_out = store.copy()
        left_out.exclude(item)
        yield left_out
        yield from self._remainder(packed, item, covered)

    def shapes(self, store: DomainStore, i: int) -> List[Tuple[Rotation, Triple]]:
        return distinct_shapes(
            self._instance.classes[store.class_of[i]], store.rotations[i]
        )

    def _at_extreme_points(
        self, store: DomainStore, i: int, covered: List[Box]
    ) -> Iterator[DomainStore]:
        instance = self._instance
        boxes = [
            (store.lo(j), store.min_sizes(instance, j))
            for j in store.packed_items()
            if j != i and store.is_fixed(j)
        ]
        lo, hi = store.lo(i), store.hi(i)
        shapes = self.shapes(store, i)
        for point in sorted(extreme_points(boxes)):
            if not all(lo[u] <= point[u] <= hi[u] for u in AXES):
                continue
            for rotation, sizes in shapes:
                if not fits(point, sizes, instance.container.dims, boxes):
                    continue
                covered.append((point, sizes))
                child = store.copy()
                for u in AXES:
                    child.fix_position(i, u, point[u])
                child.fix_rotation(i, rotation)
                child.covered = None
                yield child

    def _remainder(
        self, store: DomainStore, i: int, covered: List[Box]
    ) -> Iterator[DomainStore]:
        ruled_out = frozenset(covered)
        lo, hi = store.lo(i), store.hi(i)
        shapes = self.shapes(store, i)
        positions = 1
        for u in AXES:
            positions *= hi[u] - lo[u] + 1
        if positions * len(shapes) <= len(ruled_out) and all(
            (pos, sizes) in ruled_out
            for pos in product(*(range(lo[u], hi[u] + 1) for u in AXES))
            for _, sizes in shapes
        ):
            return
        rest = store.copy()
        rest.touched.add(i)
        rest.covered = (i, ruled_out)
        yield rest

    def _split(self, store: DomainStore, i: int) -> Iterator[DomainStore]:
        lo, hi = store.lo(i), store.hi(i)
        for u in AXES:
            if lo[u] == hi[u]:
                continue
            value = self._first_candidate(store, i, u)
            if value is None:
                return
            fixed = store.copy()
            fixed.fix_position(i, u, value)
            yield fixed
            if value < hi[u]:
                rest = store.copy()
                rest.raise_lower(i, u, value + 1)
                yield rest
            return

        assert store.covered is not None
        ruled_out = store.covered[1]
        for rotation, sizes in self.shapes(store, i):
            if (lo, sizes) in ruled_out:
                continue
            child = store.copy()
            child.fix_rotation(i, rotation)
            child.covered = None
            yield child

    def _first_candidate(self, store: DomainStore, i: int, u: int) -> Optional[int]:
        bits = self._patterns[store.class_of[i]][u]
        lo, hi = store.lo(i), store.hi(i)
        last_axis = all(lo[w] == hi[w] for w in AXES if w != u)
        sizes = store.min_sizes(self._instance, i)

        start = lo[u]
        while start <= hi[u]:
            window = (bits >> start) & ((1 << (hi[u] - start + 1)) - 1)
            if not window:
                return None
            value = start + (window & -window).bit_length() - 1
            if not last_axis:
                return value
            blocked_until = self._blocked_until(store, i, u, value, sizes)
            if blocked_until is None:
                return value
            start = max(value + 1, blocked_until)
        return None

    def _blocked_until(
        self,
        store: DomainStore,
        i: int,
        u: int,
        value: int,
        sizes: Tuple[int, int, int],
    ) -> Optional[int]:
        # First coordinate past a fixed item that a box at `value` runs into.
        lo = list(store.lo(i))
        lo[u] = value
        pos = (lo[0], lo[1], lo[2])
        for j in store.packed_items():
            if j == i or not store.position_fixed(j):
                continue
            other = store.lo(j)
            other_sizes = store.min_sizes(self._instance, j)
            if boxes_overlap(pos, sizes, other, other_sizes):
                return other[u] + other_sizes[u]
        return None


def branch(
    store: DomainStore,
    instance: Instance,
    rng: random.Random,
    strategy: str = "largest_volume",
) -> List[DomainStore]:
    return list(Brancher(instance, strategy).children(store, rng))


class IncumbentBound(Protocol):
    @property
    def objective(self) -> int: ...

    def offer(self, solution: Solution) -> bool: ...


class IncumbentCell:
    """Best solution so far, shared by the workers. Objectives only ever decrease."""

    def __init__(
        self,
        instance: Instance,
        sink: Optional[IncumbentSink],
        emit_all: bool,
        started: float,
    ) -> None:
        self._lock = threading.Lock()
        self._sink = sink
        self._emit_all = emit_all
        self._started = started
        self.history: List[Incumbent] = []
        empty = Solution.empty(instance)
        self.best = empty
        self.objective = empty.objective
        self._record(empty)

    def offer(self, solution: Solution) -> bool:
        with self._lock:
            if solution.objective >= self.objective:
                return False
            self._record(solution)
            return True

    def _record(self, solution: Solution) -> None:
        incumbent = Incumbent(solution, time.monotonic() - self._started)
        self.best = solution
        self.objective = solution.objective
        self.history.append(incumbent)
        LOG.debug(
            "incumbent objective=%d left=%d at %.3fs",
            solution.objective,
            solution.left_boxes,
            incumbent.found_at,
        )
        if self._emit_all and self._sink is not None:
            self._sink(incumbent)

    def emit_final(self) -> None:
        if not self._emit_all and self._sink is not None:
            self._sink(self.history[-1])


class BranchAndBound:
    _cell: IncumbentBound

    def __init__(
        self,
        instance: Instance,
        config: SearchConfig,
        sink: Optional[IncumbentSink] = None,
        stop_event: Optional[threading.Event] = None,
    ) -> None:
        self._instance = instance
        self._config = config
        self._stop_event: Any = stop_event or threading.Event()
        self._started = time.monotonic()
        self._deadline = self._started + config.time_limit
        self._incumbents = IncumbentCell(
            instance, sink, config.emit_all, self._started
        )
        self._cell = self._incumbents
        self._brancher = Brancher(instance, config.branching)
        self._nodes = 0
        self._nodes_lock = threading.Lock()
        self._interrupted = False
        self._root_bound = 0

    def solve(self) -> Tuple[Solution, SolveStats]:
        stats = SolveStats()
        root = DomainStore(self._instance, self._config.item_symmetry)
        propagate_fixpoint(root, self._instance, stats)
        self._root_bound = lower_bound(root, self._instance)
        LOG.info(
            "solving %s: %d items, %d classes, root bound %d",
            self._instance.name or "<unnamed>",
            self._instance.item_count,
            len(self._instance.classes),
            self._root_bound,
        )

        self._dive()
        if self._config.workers == 1:
            self.explore([root], stats, random.Random(self._config.seed))
        else:
            self._explore_parallel(root, stats)

        cell = self._incumbents
        stats.nodes_explored = self._nodes
        stats.solutions_found = len(cell.history)
        stats.wall_time = time.monotonic() - self._started
        stats.proved_optimal = (
            not self._interrupted or cell.objective <= self._root_bound
        )
        cell.emit_final()
        LOG.info(
            "finished %s: objective=%d nodes=%d optimal=%s in %.3fs",
            self._instance.name or "<unnamed>",
            cell.objective,
            stats.nodes_explored,
            stats.proved_optimal,
            stats.wall_time,
        )
        return cell.best, stats

    def _dive(self) -> None:
        for name, key, point_key in DIVES:
            if self._cell.objective <= self._root_bound or self._should_stop():
                return
            solution = first_fit(
                self._instance,
                dive_order(self._instance, key),
                point_key,
                self._should_stop,
            )
            if self._cell.offer(solution):
                LOG.debug("dive %s left %d boxes", name, solution.left_boxes)

    def _should_stop(self) -> bool:
        if self._stop_event.is_set() or time.monotonic() >= self._deadline:
            return True
        limit = self._config.node_limit
        return limit is not None and self._nodes >= limit

    def _count_node(self) -> None:
        with self._nodes_lock:
            self._nodes += 1

    def _visit(
        self, store: DomainStore, rng: random.Random
    ) -> Optional[Iterator[DomainStore]]:
        """Counts a stable node and returns its children in branching order, or None
        when the node is pruned or complete."""
        self._count_node()
        packed_volume = store.packed_volume(self._instance)
        if lower_bound(store, self._instance, packed_volume) >= self._cell.objective:
            return None
        improves = self._instance.payload_volume - packed_volume < self._cell.objective
        if improves and store.packed_fixed():
            self._cell.offer(store.to_solution(self._instance))
        if store.fully_assigned():
            return None
        return self._brancher.children(store, rng)

    def explore(
        self, stores: List[DomainStore], stats: SolveStats, rng: random.Random
    ) -> None:
        """Depth first over the subtrees of `stores`; children are built and
        propagated only when the search reaches them."""
        stack: List[Iterator[DomainStore]] = [iter(stores)]
        while stack:
            if self._cell.objective <= self._root_bound:
                return
            if self._should_stop():
                self._interrupted = True
                return
            store = next(stack[-1], None)
            if store is None:
                stack.pop()
                continue
            outcome = propagate_fixpoint(store, self._instance, stats, store.touched)
            if outcome is not Outcome.Stable:
                continue
            children = self._visit(store, rng)
            if children is not None:
                stack.append(children)

    def _frontier(
        self, root: DomainStore, stats: SolveStats, rng: random.Random
    ) -> List[DomainStore]:
        frontier = [root]
        wanted = self._config.workers * FRONTIER_PER_WORKER
        while frontier and len(frontier) < wanted:
            if self._cell.objective <= self._root_bound:
                return []
            if self._should_stop():
                self._interrupted = True
                return []
            children = self._visit(frontier.pop(0), rng)
            for child in children or ():
                outcome = propagate_fixpoint(
                    child, self._instance, stats, child.touched
                )
                if outcome is Outcome.Stable:
                    frontier.append(child)
        return frontier

    def _explore_parallel(self, root: DomainStore, stats: SolveStats) -> None:
        frontier = self._frontier(root, stats, random.Random(self._config.seed))
        if not frontier:
            return
        LOG.debug("split search into %d subtrees", len(frontier))

        context = multiprocessing.get_context("spawn")
        shared = SharedSearch(
            bound=context.Value("q", self._cell.objective),
            nodes=context.Value("q", self._nodes),
            stop=context.Event(),
            found=context.Queue(),
        )
        with ProcessPoolExecutor(
            max_workers=self._config.workers,
            mp_context=context,
            initializer=init_worker,
            initargs=(shared,),
        ) as executor:
            futures: "Set[Future[SubtreeResult]]" = {
                executor.submit(
                    explore_subtree,
                    self._instance,
                    self._config,
                    subtree,
                    self._config.seed + n,
                    self._deadline,
                    self._root_bound,
                )
                for n, subtree in enumerate(frontier)
            }
            pending = futures
            while pending:
                _, pending = wait(
                    pending, timeout=POLL_INTERVAL_S, return_when=FIRST_COMPLETED
                )
                self._collect(shared)
                if self._should_stop() or self._cell.objective <= self._root_bound:
                    shared.stop.set()
            self._collect(shared)

            for future in futures:
                result = future.result()
                stats.propagations += result.propagations
                self._interrupted |= result.interrupted
                if result.best is not None:
                    self._cell.offer(result.best)
        self._collect(shared)
        self._nodes = shared.nodes.value

    def _collect(self, shared: "SharedSearch") -> None:
        while True:
            try:
                solution = shared.found.get_nowait()
            except queue.Empty:
                return
            self._cell.offer(solution)
            with shared.bound.get_lock():
                shared.bound.value = min(shared.bound.value, self._cell.objective)


@dataclass
class SharedSearch:
    """What the worker processes of one solve share with it."""

    bound: Any
    nodes: Any
    stop: Any
    found: Any


@dataclass
class SubtreeResult:
    propagations: int
    interrupted: bool
    best: Optional[Solution]


class SharedBound:
    """Incumbent objective as seen from a worker process: the best the solve knows
    of, or better when this worker has found it first."""

    def __init__(self, shared: SharedSearch) -> None:
        self._shared = shared
        self.best: Optional[Solution] = None

    @property
    def objective(self) -> int:
        value = self._shared.bound.value
        if self.best is not None:
            value = min(value, self.best.objective)
        return value

    def offer(self, solution: Solution) -> bool:
        if solution.objective >= self.objective:
            return False
        self.best = solution
        self._shared.found.put(solution)
        with self._shared.bound.get_lock():
            if solution.objective < self._shared.bound.value:
                self._shared.bound.value = solution.objective
        return True


class SubtreeSearch(BranchAndBound):
    """Explores frontier subtrees inside a worker process."""

    def __init__(
        self,
        instance: Instance,
        config: SearchConfig,
        shared: SharedSearch,
        deadline: float,
        root_bound: int,
    ) -> None:
        super().__init__(instance, config, stop_event=shared.stop)
        self._shared = shared
        self._bound = SharedBound(shared)
        self._cell = self._bound
        self._deadline = deadline
        self._root_bound = root_bound

    def run(self, subtree: DomainStore, seed: int) -> SubtreeResult:
        stats = SolveStats()
        self.explore([subtree], stats, random.Random(seed))
        return SubtreeResult(stats.propagations, self._interrupted, self._bound.best)

    def _count_node(self) -> None:
        with self._shared.nodes.get_lock():
            self._shared.nodes.value += 1
            self._nodes = self._shared.nodes.value


_worker: Optional[SharedSearch] = None


def init_worker(shared: SharedSearch) -> None:
    global _worker  # pylint: disable=global-statement
    _worker = shared


def explore_subtree(
    instance: Instance,
    config: SearchConfig,
    subtree: DomainStore,
    seed: int,
    deadline: float,
    root_bound: int,
) -> SubtreeResult:
    assert _worker is not None, "worker process was not initialized"
    return SubtreeSearch(instance, config, _worker, deadline, root_bound).run(
        subtree, seed
    )


def solve(
    instance: Instance,
    config: Optional[SearchConfig] = None,
    sink: Optional[IncumbentSink] = None,
    stop_event: Optional[threading.Event] = None,
) -> Tuple[Solution, SolveStats]:
    return BranchAndBound(instance, config or SearchConfig(), sink, stop_event).solve()
