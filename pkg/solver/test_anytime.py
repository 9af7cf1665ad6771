import pytest
import random
from search import Incumbent, solve
from search_config import SearchConfig
from typing import List
from utils.instances import random_instance
from utils.testing import check_incumbent_stream

TIME_LIMIT_S = 2.0
# one propagation round of a twenty item store plus thread start-up
GRACE_S = 1.0


@pytest.mark.long
@pytest.mark.parametrize("seed", range(50))
def test_incumbent_stream_on_mid_size_instances(seed: int) -> None:
    rng = random.Random(seed)
    items, classes = rng.randint(18, 22), rng.randint(2, 5)
    instance = random_instance(rng, items=items, classes=classes)
    incumbents: List[Incumbent] = []

    solution, stats = solve(
        instance,
        SearchConfig(time_limit=TIME_LIMIT_S, emit_all=True, seed=seed),
        incumbents.append,
    )

    check_incumbent_stream(instance, incumbents)
    assert incumbents[-1].solution == solution
    for incumbent in incumbents:
        placed = incumbent.solution.placed
        packed = sum(instance.classes[p.class_index].volume for p in placed)
        assert packed + incumbent.solution.objective == instance.payload_volume
    assert stats.wall_time <= TIME_LIMIT_S + GRACE_S
    assert stats.solutions_found == len(incumbents)
