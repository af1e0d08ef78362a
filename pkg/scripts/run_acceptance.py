"""Run the acceptance suite and the worked examples; exit nonzero on any miss.

usage: python3 scripts/run_acceptance.py
"""

import sys
from pathlib import Path

import pytest

from curvedmodel.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    code = pytest.main([str(ROOT / "tests" / "test_acceptance.py"), "-q", "-p", "no:cacheprovider"])
    print("\nworked examples:", flush=True)
    ex = cli_main(["worked-examples", "0", "0.1", "0.2", "0.4", "--out", str(ROOT / "examples_report.json")])
    return int(code) or ex


if __name__ == "__main__":
    sys.exit(main())
