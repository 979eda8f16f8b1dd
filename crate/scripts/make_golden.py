#!/usr/bin/env python3
"""Regenerate the committed reference artifacts for the bundled mini-city.

Exports the model through the CLI, solves it with an independent LP solver
(scipy's HiGHS dual simplex), and writes:

  scenarios/mini_city/golden/solution.txt   name/value pairs, one per line
  scenarios/mini_city/golden/golden.json    objective, p-max, plugs, fleet

Run from the repository root:  python3 scripts/make_golden.py
"""

import json
import re
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

ROOT = Path(__file__).resolve().parent.parent
SCENARIO = ROOT / "scenarios" / "mini_city" / "scenario.toml"
GOLDEN_DIR = ROOT / "scenarios" / "mini_city" / "golden"


def parse_mps(path):
    """Parses the free-form MPS file written by the exporter (one entry per
    line in COLUMNS/RHS/BOUNDS)."""
    rows = {}  # name -> sense
    row_order = []
    cols = {}  # name -> index
    col_order = []
    entries = []  # (row_name, col_index, value)
    rhs = {}
    section = None
    for line in path.read_text().splitlines():
        if not line.strip() or line.startswith("*"):
            continue
        if not line.startswith(" "):
            section = line.split()[0]
            continue
        parts = line.split()
        if section == "ROWS":
            sense, name = parts
            rows[name] = sense
            row_order.append(name)
        elif section == "COLUMNS":
            name, row, val = parts
            if name not in cols:
                cols[name] = len(col_order)
                col_order.append(name)
            entries.append((row, cols[name], float(val)))
        elif section == "RHS":
            _, row, val = parts
            rhs[row] = float(val)
        elif section == "BOUNDS":
            raise ValueError("BOUNDS entries are not expected here")
    return rows, row_order, col_order, entries, rhs


def solve(mps_path):
    rows, row_order, col_order, entries, rhs = parse_mps(mps_path)
    n = len(col_order)
    c = np.zeros(n)
    eq_names = [r for r in row_order if rows[r] == "E"]
    ub_names = [r for r in row_order if rows[r] in ("L", "G")]
    eq_idx = {r: i for i, r in enumerate(eq_names)}
    ub_idx = {r: i for i, r in enumerate(ub_names)}

    eq_r, eq_c, eq_v = [], [], []
    ub_r, ub_c, ub_v = [], [], []
    for row, col, val in entries:
        if row == "COST":
            c[col] += val
        elif rows[row] == "E":
            eq_r.append(eq_idx[row])
            eq_c.append(col)
            eq_v.append(val)
        else:
            sign = 1.0 if rows[row] == "L" else -1.0
            ub_r.append(ub_idx[row])
            ub_c.append(col)
            ub_v.append(sign * val)
    a_eq = csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(eq_names), n))
    b_eq = np.array([rhs.get(r, 0.0) for r in eq_names])
    a_ub = csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(ub_names), n))
    b_ub = np.array(
        [rhs.get(r, 0.0) * (1.0 if rows[r] == "L" else -1.0) for r in ub_names]
    )
    # the exporter encodes any objective constant as a negated RHS on COST
    constant = -rhs.get("COST", 0.0)

    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs-ds",
    )
    if res.status != 0:
        sys.exit(f"reference solve failed: {res.message}")
    return col_order, res.x, float(res.fun) + constant


def main():
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [
                "cargo",
                "run",
                "--release",
                "--",
                "run",
                str(SCENARIO),
                "--export-only",
                "--out",
                tmp,
            ],
            cwd=ROOT,
            check=True,
        )
        names, x, objective = solve(Path(tmp) / "model.mps")

    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    with open(GOLDEN_DIR / "solution.txt", "w") as f:
        f.write("# reference solution computed by scipy HiGHS dual simplex\n")
        for name, v in zip(names, x):
            if abs(v) > 1e-11:
                f.write(f"{name} {v:.12e}\n")

    by_name = dict(zip(names, x))
    plug = re.compile(r"s_l(\d+)_r(\d+)$")
    peak = re.compile(r"pmax_l(\d+)$")
    plugs, pmax = {}, {}
    for name, v in by_name.items():
        if m := plug.match(name):
            plugs.setdefault(int(m.group(1)), {})[int(m.group(2))] = v
        elif m := peak.match(name):
            pmax[int(m.group(1))] = v
    n_locs = max(pmax) + 1
    n_rates = max(r for d in plugs.values() for r in d) + 1
    golden = {
        "objective_usd": objective,
        "fleet_size": by_name["F"],
        "pmax_kw": [pmax[l] for l in range(n_locs)],
        "plugs": [
            [plugs.get(l, {}).get(r, 0.0) for r in range(n_rates)]
            for l in range(n_locs)
        ],
    }
    with open(GOLDEN_DIR / "golden.json", "w") as f:
        json.dump(golden, f, indent=2)
        f.write("\n")
    print(f"objective {objective:.9f}  F={by_name['F']:.6f}")
    print("pmax", golden["pmax_kw"])
    print("plugs", golden["plugs"])


if __name__ == "__main__":
    main()
