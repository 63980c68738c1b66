#!/usr/bin/env python3
"""Solve an SDPA sparse problem with CVXPY (Clarabel) and write a CSDP-style solution.

Usage: sdpa_cvxpy.py problem.dat-s problem.sol

Solves max tr(F0 X) s.t. tr(Fi X) = ci, X block-diagonal PSD. The solution file
holds y on the first line, then `1 blk i j v` for Z = sum yi Fi - F0 and
`2 blk i j v` for X. Exit codes follow CSDP: 0 solved, 1 primal infeasible,
2 dual infeasible, 3 partial progress, 5 failure.
"""
import re
import sys

import cvxpy as cp
import numpy as np
import scipy.sparse as sp


def read_sdpa(path):
    lines = []
    with open(path) as fh:
        for line in fh:
            s = line.strip()
            if not s or s[0] in '"*':
                continue
            lines.append(re.sub(r"[{}(),]", " ", s).split())
    it = iter(lines)
    m = int(next(it)[0])
    nb = int(next(it)[0])
    sizes = []
    while len(sizes) < nb:
        sizes.extend(int(t) for t in next(it))
    fl = lambda t: float(t.replace("d", "e").replace("D", "e"))
    c = []
    while len(c) < m:
        c.extend(fl(t) for t in next(it))
    entries = [(int(t[0]), int(t[1]) - 1, int(t[2]) - 1, int(t[3]) - 1, fl(t[4])) for t in it]
    return m, sizes[:nb], np.array(c[:m]), entries


def main():
    inp, out = sys.argv[1], sys.argv[2]
    m, sizes, c, entries = read_sdpa(inp)
    nb = len(sizes)
    sides = [abs(s) for s in sizes]
    # F[mat][blk] as dense symmetric matrices.
    F = [[np.zeros((k, k)) for k in sides] for _ in range(m + 1)]
    for mat, b, i, j, v in entries:
        F[mat][b][i, j] = v
        F[mat][b][j, i] = v
    X = []
    cons = []
    for b, s in enumerate(sizes):
        if s > 0:
            v = cp.Variable((s, s), symmetric=True)
            cons.append(v >> 0)
        else:
            d = cp.Variable(-s)
            cons.append(d >= 0)
            v = cp.diag(d)
        X.append(v)
    eqs = []
    for i in range(1, m + 1):
        expr = sum(cp.sum(cp.multiply(F[i][b], X[b])) for b in range(nb) if np.any(F[i][b]))
        if isinstance(expr, int):
            expr = cp.Constant(0.0)
        eqs.append(expr == c[i - 1])
    obj = sum(cp.sum(cp.multiply(F[0][b], X[b])) for b in range(nb) if np.any(F[0][b]))
    if isinstance(obj, int):
        obj = cp.Constant(0.0)
    prob = cp.Problem(cp.Maximize(obj), cons + eqs)
    try:
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    except cp.error.SolverError:
        sys.exit(5)
    status = prob.status
    if status == cp.INFEASIBLE or status == cp.INFEASIBLE_INACCURATE:
        sys.exit(1)
    if status == cp.UNBOUNDED or status == cp.UNBOUNDED_INACCURATE:
        sys.exit(2)
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        sys.exit(5)
    y = np.array([float(np.asarray(e.dual_value).ravel()[0]) if e.dual_value is not None else 0.0 for e in eqs])
    # Pick the sign convention giving dual objective = primal objective.
    if abs(c @ y - prob.value) > abs(-c @ y - prob.value):
        y = -y
    Xv = [np.asarray(x.value, dtype=float) for x in X]
    Z = []
    for b in range(nb):
        z = -F[0][b].copy()
        for i in range(1, m + 1):
            if y[i - 1] != 0.0:
                z += y[i - 1] * F[i][b]
        Z.append(z)
    with open(out, "w") as fh:
        fh.write(" ".join(repr(float(v)) for v in y) + "\n")
        for matno, mats in ((1, Z), (2, Xv)):
            for b, s in enumerate(sizes):
                k = abs(s)
                for p in range(k):
                    for q in range(p, k):
                        if s < 0 and p != q:
                            continue
                        v = float(mats[b][p, q])
                        if v != 0.0:
                            fh.write(f"{matno} {b + 1} {p + 1} {q + 1} {v!r}\n")
    sys.exit(0 if status == cp.OPTIMAL else 3)


if __name__ == "__main__":
    main()
