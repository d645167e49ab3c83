"""Freeze J_n(x) and Y_n(x) from mpmath (40 digits) into tests/data/bessel_reference.json.

    python scripts/make_bessel_reference.py
"""

import json
from pathlib import Path

import mpmath
import numpy as np

ORDERS = [0, 1, 2, 3, 5, 8, 13, 20, 30, 45, 60]
ARGS = np.logspace(-3, np.log10(500.0), 31)


def main(path=Path(__file__).resolve().parents[1] / "tests" / "data" / "bessel_reference.json"):
    mpmath.mp.dps = 40
    rows = []
    for n in ORDERS:
        for x in ARGS:
            xm = mpmath.mpf(float(x))
            rows.append([n, float(x), float(mpmath.besselj(n, xm)), float(mpmath.bessely(n, xm))])
    payload = {"source": "mpmath besselj/bessely, 40 significant digits",
               "columns": ["n", "x", "J", "Y"], "rows": rows}
    path.write_text(json.dumps(payload, indent=0) + "\n")


if __name__ == "__main__":
    main()
