"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

"""
Deterministic rounding of relaxation solutions to integer clusterings.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from momclust.errors import SolverStatusError
from momclust.instance import ClusterSolution, optimal_centers, objective, as_labels
from momclust.logger import logger
from momclust.solver import SolverStatus

NORMS = {
    'l1': 'cityblock',
    'l2': 'euclidean',
    'linf': 'chebyshev',
}

SPACE_LAMBDA = 'lambda'
SPACE_X = 'x'


@dataclass(frozen=True, eq=False)
class FpcResult:
    """Indices of the chosen centers, achieved radius and nearest-center partition."""

    centers: np.ndarray
    radius: float
    partition: np.ndarray
    points: np.ndarray

    @property
    def center_points(self):
        return self.points[self.centers]


def distance_matrix(points, norm):
    if norm not in NORMS:
        logger.error(f"Unknown norm '{norm}'")
        raise ValueError(f"Norm must be one of {sorted(NORMS)}")
    return cdist(points, points, metric=NORMS[norm])


def as_points(points):
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    return points


def fpc(points, k, norm='l1'):
    """Farthest point clustering run from every start point, best radius kept.

    Ties in the farthest-point choice and in the nearest-center assignment go to the
    lowest point index; on equal radii the earliest start wins. Centers come back sorted.
    """
    points = as_points(points)
    n = points.shape[0]
    if n == 0 or not 1 <= k <= n:
        logger.error(f"FPC with k={k} on {n} points")
        raise ValueError("FPC needs 1 <= k <= number of points")
    logger.info(f"Running FPC on {n} points with k={k}, norm={norm}")
    dist = distance_matrix(points, norm)

    best_radius, best_centers = None, None
    for start in range(n):
        chosen = [start]
        nearest = dist[start].copy()
        for _ in range(k - 1):
            candidate = nearest.copy()
            candidate[chosen] = -1.0
            following = int(np.argmax(candidate))
            chosen.append(following)
            np.minimum(nearest, dist[following], out=nearest)
        radius = float(nearest.max())
        if best_radius is None or radius < best_radius:
            best_radius, best_centers = radius, chosen
    centers = np.sort(best_centers)
    # argmin takes the first column, so sorted centers send ties to the lowest index.
    partition = np.argmin(dist[:, centers], axis=1)
    logger.debug(f"FPC radius {best_radius} with centers {centers.tolist()}")
    return FpcResult(centers, best_radius, partition, points)


def round_solution(instance, cover, solution, space=SPACE_LAMBDA):
    """k-cluster rounding: FPC on the estimates lambda_i, then optimal centers.

    With space 'x' the estimates are mapped to x_i = V lambda_i and clustered in l2.
    """
    if solution.status not in (SolverStatus.OPTIMAL, SolverStatus.MAX_ITERATIONS):
        logger.error(f"Cannot round a {solution.status.value} relaxation")
        raise SolverStatusError(f"Rounding needs an optimal or max-iterations solve, got {solution.status.value}",
                                solution.status)
    lambdas = solution.lambdas()
    if space == SPACE_LAMBDA:
        result = fpc(lambdas, instance.k, 'l1')
    elif space == SPACE_X:
        result = fpc(lambdas @ cover.V.T, instance.k, 'l2')
    else:
        logger.error(f"Unknown rounding space '{space}'")
        raise ValueError(f"Rounding space must be '{SPACE_LAMBDA}' or '{SPACE_X}'")
    labels = result.partition
    centers, empty = optimal_centers(instance, labels)
    value = objective(instance, labels, centers)
    logger.info(f"Rounded objective {value:.10g}")
    return ClusterSolution(labels, centers, value, empty)


def lloyd_polish(instance, solution, max_iterations=100):
    """Alternate nearest-center assignment and center refits until labels settle."""
    labels = as_labels(solution.labels, n=instance.n)
    centers, empty = optimal_centers(instance, labels)
    value = objective(instance, labels, centers)
    for iteration in range(max_iterations):
        residual = np.einsum('nld,kd->nkl', instance.A, centers) - instance.b[:, None, :]
        costs = np.sum(residual * residual, axis=2)
        updated = np.argmin(costs, axis=1)
        if np.array_equal(updated, labels):
            break
        new_centers, new_empty = optimal_centers(instance, updated)
        new_value = objective(instance, updated, new_centers)
        if new_value >= value:
            break
        labels, centers, empty, value = updated, new_centers, new_empty, new_value
        logger.debug(f"Lloyd iteration {iteration}: objective {value:.10g}")
    logger.info(f"Polished objective {value:.10g}")
    return ClusterSolution(labels, centers, value, empty)
