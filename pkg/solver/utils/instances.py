import random
from model import Container, Instance, ItemClass, Triple
from typing import List, Optional, Tuple

ALL_VERTICAL = (True, True, True)


def single_class(
    container: Triple,
    dims: Triple,
    count: int,
    vertical_ok: Tuple[bool, bool, bool] = ALL_VERTICAL,
    name: str = "single",
) -> Instance:
    return Instance(
        container=Container(container),
        classes=(ItemClass(dims=dims, vertical_ok=vertical_ok, count=count),),
        name=name,
    )


def _vertical_flags(rng: random.Random) -> Tuple[bool, bool, bool]:
    flags = (rng.random() < 0.7, rng.random() < 0.7, rng.random() < 0.7)
    if not any(flags):
        k = rng.randrange(3)
        flags = (k == 0, k == 1, k == 2)
    return flags


def random_tiny_instance(
    rng: random.Random, max_items: int = 4, max_axis: int = 5, name: str = "tiny"
) -> Instance:
    """Instance small enough for the exhaustive oracle. Items may be larger than the
    container on some axis."""
    container = (
        rng.randint(2, max_axis),
        rng.randint(2, max_axis),
        rng.randint(2, max_axis),
    )
    total = rng.randint(1, max_items)
    classes: List[ItemClass] = []
    while total > 0:
        count = rng.randint(1, total)
        total -= count
        dims = (
            rng.randint(1, max_axis - 1),
            rng.randint(1, max_axis - 1),
            rng.randint(1, max_axis - 1),
        )
        classes.append(
            ItemClass(dims=dims, vertical_ok=_vertical_flags(rng), count=count)
        )
    return Instance(container=Container(container), classes=tuple(classes), name=name)


def random_instance(
    rng: random.Random,
    items: int = 20,
    classes: int = 3,
    container: Optional[Triple] = None,
    name: str = "generated",
) -> Instance:
    """Instance with `items` boxes spread over `classes` classes, sized so that
    roughly all of them together overfill the container."""
    container = container or (
        rng.randint(20, 40),
        rng.randint(20, 40),
        rng.randint(20, 40),
    )
    low = max(2, min(container) // 6)
    high = max(low + 1, min(container) // 2)
    counts = [1] * classes
    for _ in range(items - classes):
        counts[rng.randrange(classes)] += 1
    return Instance(
        container=Container(container),
        classes=tuple(
            ItemClass(
                dims=(
                    rng.randint(low, high),
                    rng.randint(low, high),
                    rng.randint(low, high),
                ),
                vertical_ok=_vertical_flags(rng),
                count=count,
            )
            for count in counts
        ),
        name=name,
    )


UPRIGHT = (False, False, True)


def pallet_instance(name: str = "pallet") -> Instance:
    """Seven upright-only classes, 100 boxes filling 56% of a 2000x3000x1100
    container, the size of the larger OR-Library cases."""
    shapes = [
        ((400, 600, 400), 10),
        ((500, 400, 300), 15),
        ((300, 400, 400), 15),
        ((350, 300, 300), 15),
        ((250, 400, 200), 15),
        ((300, 250, 250), 15),
        ((200, 200, 150), 15),
    ]
    return Instance(
        container=Container((2000, 3000, 1100)),
        classes=tuple(
            ItemClass(dims=dims, vertical_ok=UPRIGHT, count=count)
            for dims, count in shapes
        ),
        name=name,
    )
