import asyncio
import logging
import threading
from contextlib import asynccontextmanager
from model import Instance, Solution, SolveStats
from search import Incumbent, solve
from search_config import SearchConfig
from typing import AsyncIterator, List, Optional, Tuple

LOG = logging.getLogger(__name__)


class SolverRun:
    """A solve running on an executor thread, observed from asyncio.

    Incumbents found by the search are handed over to the event loop, so callers
    can stream them, wait for a target objective or stop the run early.
    """

    _instance: Instance
    _config: SearchConfig
    _incumbents: List[Incumbent]
    _queue: Optional["asyncio.Queue[Optional[Incumbent]]"]
    _future: Optional["asyncio.Future[Tuple[Solution, SolveStats]]"]

    def __init__(
        self, instance: Instance, config: Optional[SearchConfig] = None
    ) -> None:
        self._instance = instance
        self._config = config or SearchConfig()
        self._incumbents = []
        self._queue = None
        self._future = None
        self._stop_event = threading.Event()

    @asynccontextmanager
    async def run(self) -> AsyncIterator["SolverRun"]:
        loop = asyncio.get_running_loop()
        self._queue = asyncio.Queue()

        def on_incumbent(incumbent: Incumbent) -> None:
            loop.call_soon_threadsafe(self._publish, incumbent)

        self._future = loop.run_in_executor(
            None,
            solve,
            self._instance,
            self._config,
            on_incumbent,
            self._stop_event,
        )
        # Completion is scheduled after every incumbent handed over above.
        self._future.add_done_callback(lambda _: self._publish(None))
        try:
            yield self
        finally:
            self.stop()
            try:
                await self._future
            except Exception as e:  # pylint: disable=broad-exception-caught
                LOG.error("solve of %s failed: %s", self._instance.name, e)

    def _publish(self, incumbent: Optional[Incumbent]) -> None:
        if incumbent is not None:
            self._incumbents.append(incumbent)
        if self._queue is not None:
            self._queue.put_nowait(incumbent)

    def stop(self) -> None:
        self._stop_event.set()

    def is_done(self) -> bool:
        return self._future is not None and self._future.done()

    def get_incumbents(self) -> List[Incumbent]:
        return list(self._incumbents)

    def get_best(self) -> Optional[Incumbent]:
        if self._incumbents:
            return self._incumbents[-1]
        return None

    async def incumbents(self) -> AsyncIterator[Incumbent]:
        """Yields every incumbent once, in discovery order, until the solve ends."""
        assert self._queue is not None, "run() was not entered"
        while True:
            incumbent = await self._queue.get()
            if incumbent is None:
                return
            yield incumbent

    async def wait_for_objective(self, objective: int) -> Optional[Incumbent]:
        """Returns the first incumbent at or below `objective`, None if the solve
        ends without reaching it."""
        while True:
            best = self.get_best()
            if best and best.solution.objective <= objective:
                return best
            if self.is_done():
                return None
            await asyncio.sleep(0.1)

    async def result(self) -> Tuple[Solution, SolveStats]:
        assert self._future is not None, "run() was not entered"
        return await self._future
