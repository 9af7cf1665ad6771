"""Exhaustive reference solver for tiny instances.

Multisets of items are tried heaviest first and the first one that can be packed
is optimal. Packability is decided by walking the container cell by cell: the
first free cell is either left empty or becomes the minimum corner of one
remaining item in one of its orientations. Every packing is reachable that way.
Containment and overlap are checked on cell masks. The only cut is counting: a
state whose remaining items hold more volume than the free cells ahead fails.
Failed states are memoized on the occupancy ahead of the cursor and shared
between multisets.
"""

import logging
from config import ORACLE_MAX_AXIS, ORACLE_MAX_ITEMS, ORACLE_MAX_NODES
from dataclasses import dataclass
from itertools import product
from model import (
    Instance,
    Placement,
    Rotation,
    Solution,
    Triple,
    allowed_rotations,
    oriented_size,
)
from typing import Dict, List, Optional, Tuple

LOG = logging.getLogger(__name__)


class OracleLimitError(Exception):
    limit: str
    value: int

    def __init__(self, limit: str, value: int, maximum: int) -> None:
        super().__init__(f"instance exceeds oracle limit {limit}: {value} > {maximum}")
        self.limit = limit
        self.value = value


@dataclass(frozen=True)
class OracleLimits:
    max_items: int = ORACLE_MAX_ITEMS
    max_axis: int = ORACLE_MAX_AXIS
    max_nodes: int = ORACLE_MAX_NODES


# (class index, rotation) placed at the cursor, or None when the cell stays empty
Choice = Optional[Tuple[int, Rotation]]
Remaining = Tuple[int, ...]


class _GridSearch:
    def __init__(self, instance: Instance, limits: OracleLimits) -> None:
        self._instance = instance
        self._limits = limits
        self._dims = instance.container.dims
        self._cells = self._dims[0] * self._dims[1] * self._dims[2]
        self._volumes = [c.volume for c in instance.classes]
        # Orientations with equal extents cover the same cells, keep the first.
        self._shapes: List[List[Tuple[Triple, Rotation]]] = []
        for item_class in instance.classes:
            shapes: Dict[Triple, Rotation] = {}
            for rotation in allowed_rotations(item_class):
                shapes.setdefault(oriented_size(item_class, rotation), rotation)
            self._shapes.append(list(shapes.items()))
        self._masks: Dict[Tuple[Triple, int], int] = {}
        # whether the state can be completed, and the decision taken at its cursor
        self._memo: Dict[Tuple[int, int, Remaining], Tuple[bool, Choice]] = {}
        self.nodes = 0

    @property
    def cells(self) -> int:
        return self._cells

    def volume(self, remaining: Remaining) -> int:
        return sum(n * v for n, v in zip(remaining, self._volumes))

    def coordinates(self, cell: int) -> Triple:
        x = cell % self._dims[0]
        y = (cell // self._dims[0]) % self._dims[1]
        z = cell // (self._dims[0] * self._dims[1])
        return (x, y, z)

    def _mask(self, size: Triple, cell: int) -> int:
        """Cells covered by a box of `size` with its minimum corner at `cell`, 0 if
        it sticks out of the container."""
        key = (size, cell)
        if key in self._masks:
            return self._masks[key]
        d0, d1, d2 = self._dims
        x, y, z = self.coordinates(cell)
        mask = 0
        if x + size[0] <= d0 and y + size[1] <= d1 and z + size[2] <= d2:
            row = (1 << size[0]) - 1
            for dz in range(size[2]):
                for dy in range(size[1]):
                    mask |= row << (((z + dz) * d1 + (y + dy)) * d0 + x)
        self._masks[key] = mask
        return mask

    def _advance(self, cell: int, occupied: int) -> int:
        while cell < self._cells and (occupied >> cell) & 1:
            cell += 1
        return cell

    def fits(self, cell: int, occupied: int, remaining: Remaining) -> bool:
        """Whether every item of `remaining` can be placed in the free cells from
        `cell` on."""
        cell = self._advance(cell, occupied)
        if not any(remaining):
            return True
        if cell >= self._cells:
            return False
        key = (cell, occupied >> cell, remaining)
        if key in self._memo:
            return self._memo[key][0]

        self.nodes += 1
        if self.nodes > self._limits.max_nodes:
            raise OracleLimitError("max_nodes", self.nodes, self._limits.max_nodes)

        free_ahead = (self._cells - cell) - bin(occupied >> cell).count("1")
        needed = self.volume(remaining)
        if needed > free_ahead:
            self._memo[key] = (False, None)
            return False

        for k, count in enumerate(remaining):
            if count == 0:
                continue
            rest = remaining[:k] + (count - 1,) + remaining[k + 1 :]
            for size, rotation in self._shapes[k]:
                mask = self._mask(size, cell)
                if not mask or mask & occupied:
                    continue
                if self.fits(cell + 1, occupied | mask, rest):
                    self._memo[key] = (True, (k, rotation))
                    return True

        left_empty = needed < free_ahead and self.fits(cell + 1, occupied, remaining)
        self._memo[key] = (left_empty, None)
        return left_empty

    def witness(self, remaining: Remaining) -> List[Tuple[int, Rotation, Triple]]:
        placed = []
        cell, occupied = 0, 0
        while True:
            cell = self._advance(cell, occupied)
            if cell >= self._cells or not any(remaining):
                return placed
            _, choice = self._memo[(cell, occupied >> cell, remaining)]
            if choice is not None:
                k, rotation = choice
                size = oriented_size(self._instance.classes[k], rotation)
                occupied |= self._mask(size, cell)
                placed.append((k, rotation, self.coordinates(cell)))
                remaining = remaining[:k] + (remaining[k] - 1,) + remaining[k + 1 :]
            cell += 1


def brute_force_optimal(
    instance: Instance, limits: OracleLimits = OracleLimits()
) -> Tuple[int, Solution]:
    """Optimal leftover volume of a tiny instance and a packing achieving it."""
    if instance.item_count > limits.max_items:
        raise OracleLimitError("max_items", instance.item_count, limits.max_items)
    longest = max(instance.container.dims)
    if longest > limits.max_axis:
        raise OracleLimitError("max_axis", longest, limits.max_axis)

    grid = _GridSearch(instance, limits)
    # Multisets of items, heaviest first: the first one that fits is optimal.
    subsets = sorted(
        product(*(range(c.count + 1) for c in instance.classes)),
        key=lambda s: (-grid.volume(s), s),
    )
    chosen = next(
        s for s in subsets if grid.volume(s) <= grid.cells and grid.fits(0, 0, s)
    )

    offsets = instance.class_offsets
    used = [0] * len(instance.classes)
    placements = []
    for k, rotation, pos in grid.witness(chosen):
        placements.append(Placement(offsets[k] + used[k], k, rotation, pos))
        used[k] += 1
    solution = Solution.from_placements(instance, placements)
    LOG.debug(
        "oracle %s: objective=%d after %d states",
        instance.name or "<unnamed>",
        solution.objective,
        grid.nodes,
    )
    assert instance.payload_volume - grid.volume(chosen) == solution.objective
    return solution.objective, solution
