"""Slow, obviously-correct reference computations used to check the library."""

from itertools import combinations

import numpy as np


def brute_pairs(order1, order2, common=None):
    """(consistent, variant) pair counts by enumerating every unordered pair."""
    common = list(order1 if common is None else common)
    pos1 = {s: i for i, s in enumerate(order1)}
    pos2 = {s: i for i, s in enumerate(order2)}
    a = b = 0
    for i in range(len(common)):
        for j in range(i + 1, len(common)):
            x, y = common[i], common[j]
            if (pos1[x] < pos1[y]) == (pos2[x] < pos2[y]):
                a += 1
            else:
                b += 1
    return a, b


def brute_cv(order1, order2):
    n = len(order1)
    a, b = brute_pairs(order1, order2)
    return (a - b) / (n * (n - 1) / 2)


def pair_sign_matrix(perms):
    """For every permutation, the sign of each (i < j) item pair's relative order.

    Row k holds +1 where item i precedes item j in perms[k] and -1 otherwise,
    so S @ S.T gives (consistent - variant) for every pair of permutations.
    """
    perms = np.asarray(perms)
    n = perms.shape[1]
    positions = np.argsort(perms, axis=1)  # positions[k, item] = place of item in perms[k]
    pairs = list(combinations(range(n), 2))
    i = np.array([p[0] for p in pairs])
    j = np.array([p[1] for p in pairs])
    return np.where(positions[:, i] < positions[:, j], 1, -1)


def row_sums(scores):
    """Priority values by explicitly summing every pairwise difference."""
    return {x: sum(scores[x] - scores[y] for y in scores) for x in scores}
