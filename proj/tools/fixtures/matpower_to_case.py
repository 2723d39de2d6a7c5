#!/usr/bin/env python3
"""Convert a MATPOWER/PYPOWER case into the resopf scenario JSON schema.

Usage: matpower_to_case.py case6ww data/cases/case6ww.json

Quantities are converted to per-unit on the case baseMVA. Polynomial
costs (model 2) are rescaled so that cost(p_pu) equals cost(p_MW).
Branches with rateA == 0 (unlimited) get s_max = 99 p.u.
"""
import json
import math
import sys

from pypower import api

UNLIMITED_RATING = 99.0


def convert(ppc):
    base = float(ppc["baseMVA"])
    bus_rows = ppc["bus"]
    kinds = {1: "pq", 2: "pv", 3: "slack"}
    buses, loads = [], []
    for row in bus_rows:
        bid = int(row[0])
        buses.append({
            "id": bid,
            "v_min": float(row[12]),
            "v_max": float(row[11]),
            "kind": kinds[int(row[1])],
            "shunt_g": float(row[4]) / base,
            "shunt_b": float(row[5]) / base,
        })
        if row[2] != 0.0 or row[3] != 0.0:
            loads.append({"bus": bid, "p_d": float(row[2]) / base, "q_d": float(row[3]) / base})

    branches = []
    for row in ppc["branch"]:
        if int(row[10]) == 0:
            continue
        tap = float(row[8])
        shift = math.radians(float(row[9]))
        is_xfmr = tap != 0.0 or shift != 0.0
        rate = float(row[5]) / base if row[5] > 0 else UNLIMITED_RATING
        branches.append({
            "from": int(row[0]),
            "to": int(row[1]),
            "r": float(row[2]),
            "x": float(row[3]),
            "b_charge": float(row[4]),
            "tap": tap if tap != 0.0 else 1.0,
            "shift": shift,
            "s_max": rate,
            "theta_min": math.radians(float(row[11])),
            "theta_max": math.radians(float(row[12])),
            "kind": "transformer" if is_xfmr else "ac_line",
        })

    gens = []
    for gi, (row, cost) in enumerate(zip(ppc["gen"], ppc["gencost"])):
        if int(row[7]) <= 0:
            continue
        assert int(cost[0]) == 2, "only polynomial costs are supported"
        ncoef = int(cost[3])
        coef = [0.0] * (3 - ncoef) + [float(c) for c in cost[4:4 + ncoef]]
        c2, c1, c0 = coef[-3], coef[-2], coef[-1]
        gens.append({
            "id": gi,
            "bus": int(row[0]),
            "p_min": float(row[9]) / base,
            "p_max": float(row[8]) / base,
            "q_min": float(row[4]) / base,
            "q_max": float(row[3]) / base,
            "cost": [c2 * base * base, c1 * base, c0],
        })

    return {"base_mva": base, "buses": buses, "branches": branches,
            "generators": gens, "loads": loads}


def main():
    name, out = sys.argv[1], sys.argv[2]
    ppc = getattr(api, name)()
    with open(out, "w") as fh:
        json.dump(convert(ppc), fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
