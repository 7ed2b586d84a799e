"""Print a compact table of one statistic from a summary.csv.

    python scripts/summarize.py results/sweep/summary.csv --statistic utility
"""

import argparse
import csv
from collections import defaultdict


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("summary")
    ap.add_argument("--statistic", default="utility")
    ap.add_argument("--analyst", default="all")
    args = ap.parse_args(argv)

    table = defaultdict(dict)
    with open(args.summary, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["statistic"] == args.statistic and row["analyst"] == args.analyst:
                table[row["mechanism"]][row["p"]] = row
    ps = sorted({p for cells in table.values() for p in cells}, key=float)
    print(f"{'mechanism':<18}" + "".join(f"{'p=' + p:>26}" for p in ps))
    for mech, cells in table.items():
        line = f"{mech:<18}"
        for p in ps:
            r = cells.get(p)
            line += f"{'-':>26}" if r is None else \
                f"{float(r['mean']):>10.3f} [{float(r['lo']):.2f},{float(r['hi']):.2f}]".rjust(26)
        print(line)


if __name__ == "__main__":
    main()
