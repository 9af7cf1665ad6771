#!/usr/bin/env python3

import argparse
import os
import subprocess
import sys
from typing import Any, Dict, List, Optional

PROJECT_ROOT = os.path.dirname(os.path.realpath(__file__))

TEST_TIMEOUT = 300
LONG_TEST_TIMEOUT = 3600


# Runs the command with stdout and stderr piped back to executing shell
def run_command(command: List[str], env: Optional[Dict[str, Any]] = None) -> None:
    if env:
        env = {**os.environ.copy(), **env}

    print(f"|EXECUTE| {' '.join(command)}")
    subprocess.check_call(command, env=env, cwd=PROJECT_ROOT)
    print("")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument(
        "-k", type=str, help="Pass the name of test case to pytest (pytest -k)"
    )
    parser.add_argument(
        "-m", type=str, help="Pass the name of mark to pytest (pytest -m)"
    )
    parser.add_argument(
        "-v",
        action="store_true",
        help="Show stdout (by default stdout is captured and not shown)",
    )
    parser.add_argument(
        "--long", action="store_true", help="Also run tests with 'long' mark"
    )
    parser.add_argument(
        "--thpack",
        metavar="DIR",
        help="Also run tests with 'thpack' mark against the OR-Library files in DIR",
    )
    parser.add_argument("--notests", action="store_true", help="Don't run tests")
    parser.add_argument(
        "--notypecheck", action="store_true", help="Don't run typecheck, `mypy`"
    )
    args = parser.parse_args()

    if not args.notypecheck:
        run_command(["mypy", "solver", "packlab.py"])

    if not args.notests:
        timeout = LONG_TEST_TIMEOUT if args.long else TEST_TIMEOUT
        pytest_cmd = ["pytest", "-vv", "--durations=0", f"--timeout={timeout}"]
        pytest_cmd += get_pytest_arguments(args)
        env = None
        if args.thpack:
            env = {"PACKLAB_THPACK_DIR": os.path.abspath(args.thpack)}
        run_command(pytest_cmd, env)

    return 0


def get_pytest_arguments(options) -> List[str]:
    args = []

    if options.v:
        args.extend(["--capture=no"])

    if options.k:
        args.extend(["-k", options.k])

    if options.m:
        args.extend(["-m", options.m])
    else:
        marks = []
        if not options.long:
            marks.append("not long")
        if not options.thpack:
            marks.append("not thpack")
        if marks:
            args.extend(["-m", " and ".join(marks)])

    return args


if __name__ == "__main__":
    sys.exit(main())
