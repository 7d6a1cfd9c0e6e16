"""Reference solutions for the multi-group penalized log-det program.

    minimize  sum_k w_k [tr(R_k T_k) - log det T_k]
              + l1 sum_k sum_{i != j} |T_k[i, j]|
              + l2 sum_{k < k'} sum_{i, j} |T_k[i, j] - T_k'[i, j]|

with w_k = n_k / mean(n). Solved with a generic conic solver and frozen to JSON.
"""
import json
import sys

import cvxpy as cp
import numpy as np


def random_correlation(rng, p, n):
    x = rng.standard_normal((n, p)) @ rng.standard_normal((p, p))
    c = np.corrcoef(x, rowvar=False)
    return (c + c.T) / 2


def solve(rs, sizes, l1, l2):
    K, p = len(rs), rs[0].shape[0]
    w = np.asarray(sizes, float) / np.mean(sizes)
    ts = [cp.Variable((p, p), symmetric=True) for _ in range(K)]
    off = 1 - np.eye(p)
    obj = 0
    for k in range(K):
        obj += w[k] * (cp.trace(rs[k] @ ts[k]) - cp.log_det(ts[k]))
        obj += l1 * cp.sum(cp.abs(cp.multiply(off, ts[k])))
    for k in range(K):
        for k2 in range(k + 1, K):
            obj += l2 * cp.sum(cp.abs(ts[k] - ts[k2]))
    prob = cp.Problem(cp.Minimize(obj))
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10, max_iter=500)
    assert prob.status == cp.OPTIMAL, prob.status
    return prob.value, [t.value for t in ts]


def main(out_path):
    rng = np.random.default_rng(20240611)
    cases = []
    for case in range(20):
        p = int(rng.integers(2, 6))
        K = int(rng.integers(1, 4))
        sizes = [int(rng.integers(20, 80)) for _ in range(K)]
        rs = [random_correlation(rng, p, max(sizes[k], p + 5)) for k in range(K)]
        l1 = float(rng.choice([0.0, 0.02, 0.1, 0.3]))
        l2 = float(rng.choice([0.0, 0.05, 0.2, 0.6])) if K > 1 else 0.0
        if l1 == 0.0 and l2 == 0.0:
            l1 = 0.05
        value, ts = solve(rs, sizes, l1, l2)
        cases.append({
            "p": p, "K": K, "sizes": sizes, "lambda1": l1, "lambda2": l2,
            "correlations": [r.tolist() for r in rs],
            "objective": value,
            "precision": [t.tolist() for t in ts],
        })
    with open(out_path, "w") as f:
        json.dump({"cases": cases}, f, indent=1)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "fgl_cases.json")
