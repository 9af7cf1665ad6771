import pytest
from config import (
    THPACK8_CHARACTERIZATION,
    THPACK8_RESULTS,
    THPACK_CHARACTERIZATION,
)
from model import volume_utilization, Solution
from packing_io import read_thpack_file
from search import solve
from search_config import SearchConfig

FULLY_PACKED_ROWS = [k for k, (_, left) in THPACK8_RESULTS.items() if left == 0]


@pytest.mark.thpack
@pytest.mark.parametrize("suite", sorted(THPACK_CHARACTERIZATION))
def test_suite_characterization(thpack_path, suite: str) -> None:
    classes, fewest, most = THPACK_CHARACTERIZATION[suite]
    instances = read_thpack_file(thpack_path(suite)).instances

    assert len(instances) == 100
    assert {len(i.classes) for i in instances} == {classes}
    assert min(i.item_count for i in instances) == fewest
    assert max(i.item_count for i in instances) == most


@pytest.mark.thpack
def test_thpack8_characterization(thpack_path) -> None:
    instances = read_thpack_file(thpack_path("thpack8")).instances

    assert len(instances) == len(THPACK8_CHARACTERIZATION)
    for row, (classes, items, container) in THPACK8_CHARACTERIZATION.items():
        instance = instances[row - 1]
        assert len(instance.classes) == classes, row
        assert instance.item_count == items, row
        assert instance.file_dims() == container, row


@pytest.mark.thpack
@pytest.mark.parametrize("row", FULLY_PACKED_ROWS)
def test_thpack8_payload_ratio(thpack_path, row: int) -> None:
    instance = read_thpack_file(thpack_path("thpack8")).instances[row - 1]
    ratio = 100 * instance.payload_volume / instance.container.volume

    assert ratio == pytest.approx(THPACK8_RESULTS[row][0], abs=0.01)


@pytest.mark.thpack
def test_thpack8_empty_packing_utilization(thpack_path) -> None:
    instance = read_thpack_file(thpack_path("thpack8")).instances[0]
    assert volume_utilization(instance, Solution.empty(instance)) == 0.0


@pytest.mark.thpack
@pytest.mark.timeout(700)
@pytest.mark.parametrize("row", [1, 3, 4, 14])
def test_thpack8_full_pack(thpack_path, row: int) -> None:
    instance = read_thpack_file(thpack_path("thpack8")).instances[row - 1]
    solution, stats = solve(instance, SearchConfig(time_limit=600))

    assert stats.proved_optimal
    assert solution.left_boxes == 0
    assert 100 * volume_utilization(instance, solution) == pytest.approx(
        THPACK8_RESULTS[row][0], abs=0.01
    )
