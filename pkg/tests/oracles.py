"""Brute-force reference implementations, kept independent of the package code."""

from __future__ import annotations

from itertools import combinations

import numpy as np


def _children(edges, v):
    return {c for p, c in edges if p == v}


def _desc(edges, v):
    out, frontier = set(), [v]
    while frontier:
        for c in _children(edges, frontier.pop()):
            if c not in out:
                out.add(c)
                frontier.append(c)
    return out


def simple_paths(nodes, edges, x, y):
    """All simple paths in the skeleton, as node lists."""
    nbrs = {n: set() for n in nodes}
    for p, c in edges:
        nbrs[p].add(c)
        nbrs[c].add(p)
    paths = []

    def walk(path):
        last = path[-1]
        if last == y:
            paths.append(list(path))
            return
        for m in sorted(nbrs[last]):
            if m not in path:
                path.append(m)
                walk(path)
                path.pop()

    walk([x])
    return paths


def path_blocked(edges, path, z):
    edge_set = set(edges)
    for a, m, b in zip(path, path[1:], path[2:]):
        collider = (a, m) in edge_set and (b, m) in edge_set
        if collider:
            if m not in z and not (_desc(edges, m) & z):
                return True
        elif m in z:
            return True
    return False


def d_separated_bruteforce(nodes, edges, x, y, z):
    z = set(z)
    return all(path_blocked(edges, p, z) for p in simple_paths(nodes, edges, x, y))


def backdoor_bruteforce(nodes, edges, t, y, z):
    """No descendant of t in z, and every path from t into y that starts with an arrow into t is blocked."""
    z = set(z)
    if z & _desc(edges, t):
        return False
    edge_set = set(edges)
    for p in simple_paths(nodes, edges, t, y):
        if (p[1], p[0]) in edge_set and not path_blocked(edges, p, z):
            return False
    return True


def minimal_backdoor_bruteforce(nodes, edges, t, y):
    """Lexicographically first valid set among those of minimum size, or None."""
    pool = sorted(n for n in nodes if n not in (t, y))
    for k in range(len(pool) + 1):
        for cand in combinations(pool, k):
            if backdoor_bruteforce(nodes, edges, t, y, cand):
                return list(cand)
    return None


def ols_normal_equations(y, X):
    D = np.column_stack([np.ones(len(y)), X])
    beta = np.linalg.solve(D.T @ D, D.T @ y)
    resid = y - D @ beta
    rss = resid @ resid
    tss = ((y - y.mean()) ** 2).sum()
    n, k = D.shape
    return {
        "params": beta,
        "r2": 1 - rss / tss,
        "bic": n * np.log(rss / n) + k * np.log(n),
    }


def bh_by_definition(p):
    """adj_(i) = min_{j >= i} m p_(j) / j, capped at 1, in input order (double loop)."""
    m = len(p)
    order = sorted(range(m), key=lambda i: (p[i], i))
    srt = [p[i] for i in order]
    adj_sorted = []
    for i in range(m):
        best = min(m * srt[j] / (j + 1) for j in range(i, m))
        adj_sorted.append(min(best, 1.0))
    out = [0.0] * m
    for rank, idx in enumerate(order):
        out[idx] = adj_sorted[rank]
    return out
