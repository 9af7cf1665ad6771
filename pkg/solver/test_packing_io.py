import json
import packing_io
import pytest
import random
from config import PROGRESS_CSV_HEADER, get_root_path
from model import IDENTITY, Placement, Rotation, Solution, SolveStats
from packing_io import (
    ProgressRecord,
    iter_progress_csv,
    parse_thpack,
    read_instance_json,
    read_solution_json,
    read_thpack_file,
    write_instance_json,
    write_progress_csv,
    write_solution_json,
)
from oracle import brute_force_optimal
from search import DIVES, dive_order, first_fit
from utils.instances import random_instance, random_tiny_instance, single_class

SINGLE_CASE = "1\n1\n10 10 10\n1\n1 2 1 3 1 4 1 5\n"


class TestParseThpack:
    def test_single_case(self) -> None:
        suite = parse_thpack(SINGLE_CASE, "demo")

        assert suite.name == "demo"
        assert suite.seeds == [None]
        assert len(suite.instances) == 1
        instance = suite.instances[0]
        assert instance.name == "demo_001"
        assert instance.container.dims == (10, 10, 10)
        assert len(instance.classes) == 1
        item_class = instance.classes[0]
        # file order L=2, W=3, H=4 lands on axes (W, L, H)
        assert item_class.dims == (3, 2, 4)
        assert item_class.vertical_ok == (True, True, True)
        assert item_class.count == 5

    def test_container_axes_reordered(self) -> None:
        suite = parse_thpack("1\n1 42\n587 233 220\n1\n1 10 1 20 0 30 1 2\n")
        instance = suite.instances[0]

        assert suite.seeds == [42]
        assert instance.container.dims == (233, 587, 220)
        assert instance.file_dims() == (587, 233, 220)
        assert instance.classes[0].dims == (20, 10, 30)
        assert instance.classes[0].vertical_ok == (False, True, True)

    def test_free_layout_tokens(self) -> None:
        text = (
            "2\n 1 7\n 10 10 10 2\n 1 2 1 3 1 4 1 5 2 1 1 1 1 1 1 3\n"
            " 2 8\n 5 5 5\n 1\n 1 1 1 1 1 1 1 1\n"
        )
        suite = parse_thpack(text)

        assert [i.item_count for i in suite.instances] == [8, 1]
        assert suite.seeds == [7, 8]

    def test_sample_file(self) -> None:
        suite = read_thpack_file(get_root_path("data/thpack/sample.txt"))

        assert suite.name == "sample"
        assert [i.name for i in suite.instances] == ["sample_001", "sample_002"]
        assert [len(i.classes) for i in suite.instances] == [2, 1]
        assert suite.instances[1].payload_volume == 5 * 24

    def test_mislabelled_case_uses_position(self) -> None:
        suite = parse_thpack("1\n3\n10 10 10\n1\n1 2 1 3 1 4 1 5\n")
        assert suite.instances[0].name == "thpack_001"

    def test_no_vertical_dimension(self) -> None:
        with pytest.raises(packing_io.ThpackParseError) as e:
            parse_thpack("1\n1\n10 10 10\n1\n1 2 0 3 0 4 0 5\n")

        assert e.value.line == 5
        assert e.value.instance_index == 1

    def test_malformed_token(self) -> None:
        with pytest.raises(packing_io.ThpackParseError) as e:
            parse_thpack("1\n1\n10 x 10\n1\n1 2 1 3 1 4 1 5\n")

        assert e.value.line == 3
        assert "container width" in e.value.message

    def test_non_positive_dimension(self) -> None:
        with pytest.raises(packing_io.ThpackParseError) as e:
            parse_thpack("1\n1\n10 10 10\n1\n1 0 1 3 1 4 1 5\n")

        assert e.value.line == 5

    def test_bad_flag(self) -> None:
        with pytest.raises(packing_io.ThpackParseError):
            parse_thpack("1\n1\n10 10 10\n1\n1 2 2 3 1 4 1 5\n")

    def test_missing_class(self) -> None:
        with pytest.raises(packing_io.ThpackParseError) as e:
            parse_thpack("1\n1\n10 10 10\n2\n1 2 1 3 1 4 1 5\n")

        assert "unexpected end of file" in e.value.message

    def test_trailing_data(self) -> None:
        with pytest.raises(packing_io.ThpackParseError) as e:
            parse_thpack(SINGLE_CASE + "9\n")

        assert e.value.instance_index is None
        assert e.value.line == 6


class TestInstanceJson:
    def test_round_trip(self) -> None:
        suite = parse_thpack("1\n1 42\n587 233 220\n1\n1 10 1 20 0 30 1 2\n")
        instance = suite.instances[0]
        assert read_instance_json(write_instance_json(instance)) == instance

    def test_malformed(self) -> None:
        with pytest.raises(packing_io.DocumentFormatError):
            read_instance_json('{"name": "x", "container": [1, 2], "classes": []}')


class TestSolutionJson:
    def test_empty_solution(self) -> None:
        instance = single_class((10, 10, 10), (2, 3, 4), 5, name="box")
        document = json.loads(
            write_solution_json(instance, Solution.empty(instance), SolveStats())
        )

        assert document["placements"] == []
        assert document["objective"] == 120
        assert document["unpacked"] == [5]
        assert document["left_boxes"] == 5
        assert document["instance"] == "box"

    def test_unit_cube(self) -> None:
        instance = single_class((1, 1, 1), (1, 1, 1), 1)
        solution = Solution.from_placements(
            instance, [Placement(0, 0, IDENTITY, (0, 0, 0))]
        )
        document = json.loads(write_solution_json(instance, solution, SolveStats()))

        assert document["placements"] == [
            {
                "item": 0,
                "class": 0,
                "pos": [0, 0, 0],
                "size": [1, 1, 1],
                "rotation": [0, 1, 2],
            }
        ]
        assert document["volume_utilization"] == 1.0

    def test_round_trip_keeps_rotation(self) -> None:
        instance = single_class((5, 5, 5), (2, 2, 3), 2)
        solution = Solution.from_placements(
            instance,
            [
                Placement(0, 0, Rotation((1, 0, 2)), (0, 0, 0)),
                Placement(1, 0, Rotation((2, 0, 1)), (2, 0, 0)),
            ],
        )
        stats = SolveStats(nodes_explored=3, proved_optimal=True)
        text = write_solution_json(instance, solution, stats)

        parsed, document = read_solution_json(text)
        assert parsed == solution
        assert document.stats.to_stats().nodes_explored == 3
        assert document.stats.proved_optimal
        assert not packing_io.consistency_violations(instance, parsed, document)

    def test_refuses_invalid_solution(self) -> None:
        instance = single_class((2, 2, 2), (1, 1, 1), 2)
        solution = Solution.from_placements(
            instance,
            [
                Placement(0, 0, IDENTITY, (0, 0, 0)),
                Placement(1, 0, IDENTITY, (0, 0, 0)),
            ],
        )
        with pytest.raises(packing_io.InvalidSolutionError) as e:
            write_solution_json(instance, solution, SolveStats())

        assert [v.constraint for v in e.value.violations] == ["overlap"]

    def test_tampered_header_is_inconsistent(self) -> None:
        instance = single_class((1, 1, 1), (1, 1, 1), 1, name="cube")
        solution = Solution.from_placements(
            instance, [Placement(0, 0, IDENTITY, (0, 0, 0))]
        )
        document = json.loads(write_solution_json(instance, solution, SolveStats()))
        document["left_boxes"] = 1
        document["placements"][0]["size"] = [1, 1, 2]

        parsed, stored = read_solution_json(json.dumps(document))
        violations = packing_io.consistency_violations(instance, parsed, stored)
        assert len(violations) == 2

    def test_not_json(self) -> None:
        with pytest.raises(packing_io.DocumentFormatError):
            read_solution_json("placements: []")


class TestProgressCsv:
    def test_header_only(self) -> None:
        assert write_progress_csv([]) == PROGRESS_CSV_HEADER + "\n"

    def test_one_record(self) -> None:
        text = write_progress_csv([ProgressRecord(10.0, 120, 5, 0.5)])

        assert text.splitlines() == [PROGRESS_CSV_HEADER, "10.000,120,5,0.5000"]
        assert list(iter_progress_csv(text)) == [ProgressRecord(10.0, 120, 5, 0.5)]

    def test_progress_record(self) -> None:
        instance = single_class((2, 1, 1), (1, 1, 1), 3)
        solution = Solution.from_placements(
            instance, [Placement(0, 0, IDENTITY, (0, 0, 0))]
        )
        record = packing_io.progress_record(instance, solution, 1.5)

        assert record == ProgressRecord(1.5, 2, 2, 0.5)


@pytest.mark.parametrize("seed", range(15))
def test_generated_solutions_survive_the_document(seed: int) -> None:
    rng = random.Random(seed)
    instance = random_instance(rng, items=rng.randint(5, 30))
    for name, key, point_key in DIVES:
        solution = first_fit(instance, dive_order(instance, key), point_key)
        stats = SolveStats(nodes_explored=seed, solutions_found=1)

        parsed, document = read_solution_json(
            write_solution_json(instance, solution, stats)
        )
        assert parsed == solution, name
        assert not packing_io.consistency_violations(instance, parsed, document)


@pytest.mark.parametrize("seed", range(15))
def test_exhaustive_witness_survives_the_document(seed: int) -> None:
    instance = random_tiny_instance(random.Random(seed))
    _, solution = brute_force_optimal(instance)

    parsed, _ = read_solution_json(
        write_solution_json(instance, solution, SolveStats())
    )
    assert parsed == solution
