import asyncio
from asyncio import Future
from model import Instance, validate
from search import Incumbent
from typing import Any, Coroutine, List, Optional, Sequence, TypeVar, Union

# Waiting categories for async tests. Incumbents of tiny instances show up almost
# immediately, full solves of the generated instances take seconds.

T = TypeVar("T")
Waitable = Union[Coroutine[Any, Any, T], Future]


async def wait_normal(awaitable: Waitable[T]) -> T:
    """Wait for 1 second"""
    return await asyncio.wait_for(awaitable, 1)


async def wait_long(awaitable: Waitable[T]) -> T:
    """Wait for 5 seconds"""
    return await asyncio.wait_for(awaitable, 5)


async def wait_lengthy(awaitable: Waitable[T]) -> T:
    """Wait for 30 seconds"""
    return await asyncio.wait_for(awaitable, 30)


def unpack_optional(opt: Optional[T]) -> T:
    if opt is None:
        raise ValueError("Optional value is None")
    return opt


def objectives(incumbents: Sequence[Incumbent]) -> List[int]:
    return [i.solution.objective for i in incumbents]


def check_incumbent_stream(instance: Instance, incumbents: Sequence[Incumbent]) -> None:
    """Asserts a stream starts at the empty packing, strictly improves, is found in
    time order and holds only valid packings."""
    values = objectives(incumbents)
    assert values, "no incumbent reported"
    assert values[0] == instance.payload_volume
    assert all(a > b for a, b in zip(values, values[1:])), values
    times = [i.found_at for i in incumbents]
    assert times == sorted(times)
    for incumbent in incumbents:
        violations = validate(instance, incumbent.solution)
        assert not violations, [str(v) for v in violations]
