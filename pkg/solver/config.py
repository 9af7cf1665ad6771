import os
from typing import Dict, Tuple

PROJECT_ROOT = os.path.dirname(os.path.realpath(__file__)) + "/../"


# Get file path relative to project root
def get_root_path(path: str) -> str:
    return os.path.normpath(PROJECT_ROOT + path)


# OR-Library files are not redistributed with the repository, point this variable
# at a directory holding `thpack1.txt` ... `thpack8.txt`.
THPACK_DIR = os.environ.get("PACKLAB_THPACK_DIR", get_root_path("data/thpack"))

CM3_PER_M3 = 1_000_000

DEFAULT_TIME_LIMIT_MS = 60_000
DEFAULT_WORKERS = 1
DEFAULT_SEED = 0

ORACLE_MAX_ITEMS = 4
ORACLE_MAX_AXIS = 8
ORACLE_MAX_NODES = 5_000_000

# `cli` exit statuses
EXIT_OK = 0
EXIT_IO_ERROR = 2
EXIT_VALIDATION_FAILED = 3

PROGRESS_CSV_HEADER = "elapsed_s,objective_cm3,left_boxes,volume_utilization"

# Published characterization of the thpack1-7 suites: classes per instance and the
# range of item totals across the suite.
THPACK_CHARACTERIZATION: Dict[str, Tuple[int, int, int]] = {
    "thpack1": (3, 69, 476),
    "thpack2": (5, 81, 266),
    "thpack3": (8, 80, 232),
    "thpack4": (10, 75, 233),
    "thpack5": (12, 84, 218),
    "thpack6": (15, 85, 203),
    "thpack7": (20, 90, 172),
}

# thpack8 per instance: classes, items, container in file order (L, W, H)
THPACK8_CHARACTERIZATION: Dict[int, Tuple[int, int, Tuple[int, int, int]]] = {
    1: (7, 100, (3000, 2000, 1000)),
    2: (8, 200, (3000, 2000, 1000)),
    3: (8, 200, (4000, 2400, 1300)),
    4: (7, 100, (3000, 2000, 1100)),
    5: (6, 120, (3000, 2000, 900)),
    6: (8, 200, (3500, 2400, 1000)),
    7: (8, 200, (3500, 2400, 1300)),
    8: (6, 130, (3200, 2000, 1200)),
    9: (8, 200, (5000, 2400, 1400)),
    10: (8, 250, (5000, 2400, 1600)),
    11: (6, 100, (3000, 2400, 1000)),
    12: (6, 120, (3200, 2400, 1000)),
    13: (7, 120, (3500, 2000, 1200)),
    14: (6, 120, (3500, 2200, 1100)),
    15: (10, 150, (6000, 2800, 1400)),
}

# Reference thpack8 results of the constraint model: VU percent and left boxes
THPACK8_RESULTS: Dict[int, Tuple[float, int]] = {
    1: (62.50, 0),
    2: (79.09, 42),
    3: (53.43, 0),
    4: (54.96, 0),
    5: (77.19, 0),
    6: (76.22, 51),
    7: (70.12, 29),
    8: (59.42, 0),
    9: (61.89, 0),
    10: (63.59, 12),
    11: (62.16, 0),
    12: (78.02, 1),
    13: (79.37, 6),
    14: (62.81, 0),
    15: (58.89, 3),
}
