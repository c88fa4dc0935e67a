"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

"""
Brute-force reference solvers: exact clustering by set-partition enumeration and exact
k-center by subset enumeration.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from momclust.config import ORACLE_MAX_PARTITIONS, ORACLE_MAX_SUBSETS
from momclust.errors import SizeGuardError
from momclust.instance import ClusterSolution, cluster_statistics, fit_center, optimal_centers, objective
from momclust.logger import logger
from momclust.rounding import distance_matrix, as_points


@dataclass(frozen=True, eq=False)
class ExactResult:
    solution: ClusterSolution
    optimum: float
    enumerated: int


def stirling2(n, k):
    """Stirling number of the second kind S(n, k)."""
    row = [1] + [0] * k
    for i in range(1, n + 1):
        previous = row
        row = [0] * (k + 1)
        for j in range(1, min(i, k) + 1):
            row[j] = j * previous[j] + previous[j - 1]
    return row[k]


def partition_count(n, k):
    """Number of set partitions of n items into at most k blocks."""
    return sum(stirling2(n, j) for j in range(1, k + 1))


def restricted_growth_strings(n, k):
    """Labelings a_0..a_{n-1} with a_0 = 0 and a_i <= max(a_0..a_{i-1}) + 1 < k."""
    labels = [0] * n

    def extend(i, top):
        if i == n:
            yield tuple(labels)
            return
        for j in range(min(top + 2, k)):
            labels[i] = j
            yield from extend(i + 1, max(top, j))

    if n:
        yield from extend(1, 0)


def exact_cluster(instance, max_partitions=ORACLE_MAX_PARTITIONS):
    """Global optimum over all assignments, one representative per relabeling class."""
    n, k = instance.n, instance.k
    count = partition_count(n, k)
    if count > max_partitions:
        logger.error(f"Exact clustering would enumerate {count} partitions (limit {max_partitions})")
        raise SizeGuardError(f"{count} partitions exceed the limit {max_partitions}", count, max_partitions)
    logger.info(f"Enumerating {count} partitions of {n} terms into at most {k} clusters")

    cache = {}

    def cost(mask):
        if mask not in cache:
            members = [i for i in range(n) if mask >> i & 1]
            H, g, c = cluster_statistics(instance, members)
            cache[mask] = fit_center(H, g, c, instance.normalized)[1]
        return cache[mask]

    best_value, best_labels, enumerated = math.inf, None, 0
    for labels in restricted_growth_strings(n, k):
        enumerated += 1
        masks = [0] * k
        for i, j in enumerate(labels):
            masks[j] |= 1 << i
        value = sum(cost(mask) for mask in masks if mask)
        if value < best_value:
            best_value, best_labels = value, labels
    labels = np.array(best_labels)
    centers, empty = optimal_centers(instance, labels)
    optimum = objective(instance, labels, centers)
    logger.info(f"Exact optimum {optimum:.10g} after {enumerated} partitions")
    return ExactResult(ClusterSolution(labels, centers, optimum, empty), optimum, enumerated)


def exact_kcenter(points, k, norm='l2', max_subsets=ORACLE_MAX_SUBSETS):
    """Best center subset of the input points and its radius."""
    points = as_points(points)
    n = points.shape[0]
    if not 1 <= k <= n:
        logger.error(f"Exact k-center with k={k} on {n} points")
        raise ValueError("Exact k-center needs 1 <= k <= number of points")
    count = math.comb(n, k)
    if count > max_subsets:
        logger.error(f"Exact k-center would enumerate {count} subsets (limit {max_subsets})")
        raise SizeGuardError(f"{count} subsets exceed the limit {max_subsets}", count, max_subsets)
    dist = distance_matrix(points, norm)
    best_radius, best_centers = math.inf, None
    for subset in itertools.combinations(range(n), k):
        radius = float(dist[:, list(subset)].min(axis=1).max())
        if radius < best_radius:
            best_radius, best_centers = radius, subset
    logger.info(f"Exact k-center radius {best_radius} over {count} subsets")
    return np.array(best_centers), best_radius
