"""Print the predicted small-value regime for a panel of offspring/immigration laws.

    python3 scripts/regime_table.py [--variant curlyW|tildeW|W_only]
"""

import argparse

from branchtail.asymptotics import classify
from branchtail.distributions import ImmigrationSpec, OffspringSpec, parse_literal

PANEL = [
    ("{1:0.5, 2:0.5}", "{0:0.5, 1:0.5}"),
    ("{1:0.5, 2:0.5}", "{1:1}"),
    ("{2:0.5, 3:0.5}", "{1:1}"),
    ("{0:0.25, 2:0.75}", "{1:1}"),
    ("fl(m=2)", "{0:0.3, 2:0.7}"),
    ("{1:0.1, 3:0.9}", "{2:0.5, 4:0.5}"),
    ("{0:0.1, 1:0.2, 4:0.7}", "{0:0.2, 1:0.8}"),
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--variant", default="curlyW")
    args = ap.parse_args()
    print(f"{'offspring':<24} {'immigration':<18} {'regime':<12} {'model':<10} rate")
    for o, y in PANEL:
        r = classify(OffspringSpec(parse_literal(o)), ImmigrationSpec(parse_literal(y)), args.variant)
        rate = f"{r.rate:.6g}" if r.rate is not None else "-"
        print(f"{o:<24} {y:<18} {r.regime.value:<12} {r.regime.model or '-':<10} {rate}")


if __name__ == "__main__":
    main()
