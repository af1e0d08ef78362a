"""Write the worked product fixture (three systems and expected products) as JSON files.

usage: python3 scripts/export_fixtures.py [OUTDIR] [EPSILON ...]
"""

import sys
from pathlib import Path

from curvedmodel.commands import dumps
from curvedmodel.fixtures import product_fixture_documents


def main(argv: list[str]) -> int:
    out = Path(argv[0]) if argv else Path("fixtures")
    epsilons = [float(e) for e in argv[1:]] or [0.1, 0.2, 0.4]
    for eps in epsilons:
        d = out / f"eps_{eps:g}"
        d.mkdir(parents=True, exist_ok=True)
        docs = product_fixture_documents(eps)
        for name, doc in docs.items():
            (d / f"{name}.json").write_text(dumps(doc))
        print(f"{d}: {', '.join(sorted(docs))}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
