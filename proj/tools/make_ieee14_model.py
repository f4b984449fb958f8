#!/usr/bin/env python3
"""Regenerate data/ieee14.model and data/ieee14.x0.

H is the DC-model measurement Jacobian of the standard IEEE 14-bus case:
bus 1 is the angle reference (its column is dropped), meters are the 13
non-reference bus injections followed by 10 line flows. x0 is the DC power
flow solution of the case-14 load/generation profile (slack at bus 1).
"""
import pathlib
import numpy as np

# from, to, reactance (p.u.), case-14 branch table
BRANCHES = [
    (1, 2, 0.05917), (1, 5, 0.22304), (2, 3, 0.19797), (2, 4, 0.17632),
    (2, 5, 0.17388), (3, 4, 0.17103), (4, 5, 0.04211), (4, 7, 0.20912),
    (4, 9, 0.55618), (5, 6, 0.25202), (6, 11, 0.19890), (6, 12, 0.25581),
    (6, 13, 0.13027), (7, 8, 0.17615), (7, 9, 0.11001), (9, 10, 0.08450),
    (9, 14, 0.27038), (10, 11, 0.19207), (12, 13, 0.19988), (13, 14, 0.34802),
]
METERED_LINES = [(1, 2), (1, 5), (2, 3), (2, 4), (4, 7), (5, 6), (6, 13),
                 (7, 9), (9, 10), (12, 13)]
# MW, base 100 MVA
LOAD = {2: 21.7, 3: 94.2, 4: 47.8, 5: 7.6, 6: 11.2, 9: 29.5, 10: 9.0,
        11: 3.5, 12: 6.1, 13: 13.5, 14: 14.9}
GEN = {2: 40.0}
BUSES = 14
REF = 1
SIGMA_V2 = 1e-4
SIGMA_W2 = 2e-4


def col(bus):
    return bus - 2  # bus 2 -> column 0


def main():
    n = BUSES - 1
    susc = {(f, t): 1.0 / x for f, t, x in BRANCHES}
    rows, meta = [], []
    for bus in range(2, BUSES + 1):
        h = np.zeros(n)
        for (f, t), b in susc.items():
            if bus not in (f, t):
                continue
            other = t if bus == f else f
            h[col(bus)] += b
            if other != REF:
                h[col(other)] -= b
        rows.append(h)
        meta.append(f"injection {bus}")
    for f, t in METERED_LINES:
        b = susc[(f, t)]
        h = np.zeros(n)
        if f != REF:
            h[col(f)] += b
        if t != REF:
            h[col(t)] -= b
        rows.append(h)
        meta.append(f"flow {f} {t}")
    H = np.array(rows)
    assert H.shape == (23, 13)
    assert np.linalg.matrix_rank(H) == n

    p = np.zeros(n)
    for bus in range(2, BUSES + 1):
        p[col(bus)] = (GEN.get(bus, 0.0) - LOAD.get(bus, 0.0)) / 100.0
    B = H[:n]  # injection rows of the non-reference buses form the reduced B
    x0 = np.linalg.solve(B, p)

    root = pathlib.Path(__file__).resolve().parent.parent / "data"
    with open(root / "ieee14.model", "w") as fh:
        fh.write("# IEEE 14-bus DC measurement model\n")
        fh.write("# state: phase angles of buses 2..14 (bus 1 is the reference)\n")
        fh.write("# meters 1-13: injections at buses 2..14; meters 14-23: line flows\n")
        fh.write(f"#@ reference {REF}\n")
        for i, (f, t, x) in enumerate(BRANCHES, start=1):
            fh.write(f"#@ branch {f} {t} {1.0 / x:.12g}\n")
        for k, m in enumerate(meta, start=1):
            fh.write(f"#@ meter {k} {m}\n")
        fh.write(f"# {n} {H.shape[0]}\n")
        for h in H:
            fh.write(" ".join(f"{v:.12g}" for v in h) + "\n")
        fh.write(f"{SIGMA_V2:g} {SIGMA_W2:g}\n")
    with open(root / "ieee14.x0", "w") as fh:
        fh.write("# DC power flow angles (rad) of buses 2..14, case-14 profile\n")
        fh.write(" ".join(f"{v:.12g}" for v in x0) + "\n")


if __name__ == "__main__":
    main()
