from config import DEFAULT_SEED, DEFAULT_TIME_LIMIT_MS, DEFAULT_WORKERS
from dataclasses import dataclass, field
from dataclasses_json import DataClassJsonMixin, config, dataclass_json, Undefined
from typing import Optional, Tuple


def ExcludeIfNone(value) -> bool:
    return value is None


BRANCHING_STRATEGIES: Tuple[str, ...] = ("largest_volume", "input_order", "random")
# Accepted names that have no implementation, rejected explicitly.
RESERVED_STRATEGIES: Tuple[str, ...] = ("restart", "portfolio")


class SearchConfigError(Exception):
    field: str
    value: object

    def __init__(self, field_name: str, value: object, reason: str) -> None:
        super().__init__(f"invalid search option {field_name}={value!r}: {reason}")
        self.field = field_name
        self.value = value


@dataclass_json(undefined=Undefined.EXCLUDE)
@dataclass
class SearchConfig(DataClassJsonMixin):
    # seconds of wall clock
    time_limit: float = DEFAULT_TIME_LIMIT_MS / 1000
    workers: int = DEFAULT_WORKERS
    seed: int = DEFAULT_SEED
    emit_all: bool = False
    branching: str = "largest_volume"
    item_symmetry: bool = True
    node_limit: Optional[int] = field(
        default=None, metadata=config(exclude=ExcludeIfNone)
    )

    def __post_init__(self) -> None:
        if not self.time_limit > 0:
            raise SearchConfigError("time_limit", self.time_limit, "must be positive")
        if self.workers < 1:
            raise SearchConfigError("workers", self.workers, "must be at least 1")
        if self.branching in RESERVED_STRATEGIES:
            raise SearchConfigError("branching", self.branching, "not supported")
        if self.branching not in BRANCHING_STRATEGIES:
            raise SearchConfigError(
                "branching",
                self.branching,
                f"expected one of {', '.join(BRANCHING_STRATEGIES)}",
            )
        if self.node_limit is not None and self.node_limit < 1:
            raise SearchConfigError("node_limit", self.node_limit, "must be positive")
