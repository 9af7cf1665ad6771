#!/usr/bin/env python3

import os
import sys

# isort: off
PROJECT_ROOT = os.path.dirname(os.path.realpath(__file__))
sys.path += [f"{PROJECT_ROOT}/solver"]
from cli import main  # type: ignore # pylint: disable=import-error, wrong-import-position


if __name__ == "__main__":
    sys.exit(main())
