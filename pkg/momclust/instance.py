"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

"""
Clustering instances, homogenized quadratic forms, objectives and synthetic families.
"""

import json
from dataclasses import dataclass

import numpy as np

from momclust.config import PINV_RCOND, GEN_MIN_SEPARATION, GEN_SPREAD, GEN_NOISE, GEN_MAX_DRAWS, CYLINDER_Z_MAX
from momclust.logger import logger


class ClusterInstance:
    """Data terms (A_i, b_i) of the clustering problem

        min_{U, x}  sum_ij u_ij ||A_i x_j - b_i||^2

    stored as stacked arrays A (n, l, d) and b (n, l).

    When `normalized` is r > 0 the first r coordinates of every center are constrained
    to the unit sphere (hyperplane normals). Such instances need b = 0.
    """

    def __init__(self, A, b, k, name=None, family='custom', normalized=0, points=None):
        A = np.array(A, dtype=float)
        b = np.array(b, dtype=float)
        if A.ndim != 3 or b.ndim != 2 or A.shape[:2] != b.shape:
            logger.error(f"Inconsistent term shapes A{A.shape}, b{b.shape}")
            raise ValueError("Terms need A of shape (n, l, d) and b of shape (n, l)")
        n, l, d = A.shape
        if n == 0 or l == 0 or d == 0:
            logger.error(f"Empty instance A{A.shape}")
            raise ValueError("Instance needs at least one term with l, d >= 1")
        if not isinstance(k, (int, np.integer)) or not 1 <= k <= n:
            logger.error(f"Cluster count k={k} outside [1, {n}]")
            raise ValueError(f"k must be an integer in [1, n={n}]")
        if not 0 <= normalized <= d:
            logger.error(f"normalized={normalized} outside [0, {d}]")
            raise ValueError("normalized must lie in [0, d]")
        if normalized and np.any(b != 0):
            logger.error("Unit-norm centers requested with nonzero b")
            raise ValueError("Instances with normalized centers must have b = 0")

        A.setflags(write=False)
        b.setflags(write=False)
        self.A = A
        self.b = b
        self.k = int(k)
        self.n, self.l, self.d = n, l, d
        self.name = name or f"{family}-n{n}-k{k}"
        self.family = family
        self.normalized = int(normalized)
        self.points = None if points is None else np.array(points, dtype=float)

    @classmethod
    def from_terms(cls, terms, k, **kwargs):
        terms = list(terms)
        if not terms:
            logger.error("Instance without terms")
            raise ValueError("Instance needs at least one term")
        A = [np.atleast_2d(np.asarray(a, dtype=float)) for a, _ in terms]
        b = [np.atleast_1d(np.asarray(v, dtype=float)) for _, v in terms]
        if len({a.shape for a in A}) != 1 or len({v.shape for v in b}) != 1:
            logger.error("Terms of different shapes")
            raise ValueError("All A_i must share one shape and all b_i one length")
        return cls(np.stack(A), np.stack(b), k, **kwargs)

    @classmethod
    def euclidean(cls, points, k, **kwargs):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        n, d = points.shape
        kwargs.setdefault('family', 'euclidean')
        return cls(np.broadcast_to(np.eye(d), (n, d, d)), points, k, **kwargs)

    def with_k(self, k):
        """Copy of the instance with another cluster count."""
        return ClusterInstance(self.A, self.b, k, name=self.name, family=self.family,
                               normalized=self.normalized, points=self.points)

    def terms(self):
        return [(self.A[i], self.b[i]) for i in range(self.n)]

    def center_box(self, pad=0.05):
        """Axis-aligned box expected to contain the optimal centers."""
        if self.family == 'euclidean':
            lo = self.b.min(axis=0)
            hi = self.b.max(axis=0)
            # Coincident points still get a nondegenerate box.
            span = np.maximum(hi - lo, 1e-3 * (1.0 + float(np.abs(self.b).max())))
            return lo - pad * span, hi + pad * span
        return -np.ones(self.d), np.ones(self.d)

    def display_points(self):
        """Points for a scatter plot: data points, hyperplane rows or pre-lift points."""
        if self.points is not None:
            return self.points
        if self.family == 'euclidean':
            return np.array(self.b)
        if self.l == 1:
            return self.A[:, 0, :]
        return None

    def to_dict(self):
        data = {
            'name': self.name,
            'family': self.family,
            'k': self.k,
            'normalized': self.normalized,
            'terms': [{'A': self.A[i].tolist(), 'b': self.b[i].tolist()} for i in range(self.n)],
        }
        if self.points is not None:
            data['points'] = self.points.tolist()
        return data

    @classmethod
    def from_dict(cls, data):
        try:
            terms = [(term['A'], term['b']) for term in data['terms']]
            k = data['k']
        except (KeyError, TypeError) as e:
            logger.error(f"Malformed instance data: {e}")
            raise ValueError(f"Instance JSON needs 'k' and 'terms' with 'A' and 'b': {e}")
        return cls.from_terms(terms, k, name=data.get('name'), family=data.get('family', 'custom'),
                              normalized=data.get('normalized', 0), points=data.get('points'))

    def __repr__(self):
        return f"ClusterInstance({self.name}, n={self.n}, l={self.l}, d={self.d}, k={self.k})"


@dataclass(frozen=True, eq=False)
class ClusterSolution:
    """Integer clustering: labels in [0, k), centers (k, d), objective, empty clusters."""

    labels: np.ndarray
    centers: np.ndarray
    objective: float
    empty: tuple = ()

    @property
    def U(self):
        return assignment_matrix(self.labels, self.centers.shape[0])

    def to_dict(self):
        return {
            'labels': self.labels.tolist(),
            'centers': self.centers.tolist(),
            'objective': self.objective,
            'empty': list(self.empty),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data['labels'], dtype=int), np.asarray(data['centers'], dtype=float),
                   float(data['objective']), tuple(data.get('empty', ())))


def assignment_matrix(labels, k):
    labels = np.asarray(labels, dtype=int)
    U = np.zeros((labels.size, k))
    U[np.arange(labels.size), labels] = 1.0
    return U


def as_labels(U, n=None, k=None):
    """Label vector from either a label vector or a 0/1 assignment matrix."""
    U = np.asarray(U)
    if U.ndim == 1:
        labels = U.astype(int)
        if np.any(labels != U) or (labels.size and labels.min() < 0) or (k is not None and labels.size and labels.max() >= k):
            logger.error(f"Invalid label vector {U}")
            raise ValueError("Labels must be integers in [0, k)")
    elif U.ndim == 2:
        if np.any((U != 0) & (U != 1)) or np.any(U.sum(axis=1) != 1):
            logger.error("Assignment matrix is not 0/1 with unit row sums")
            raise ValueError("Assignment matrix must be 0/1 with unit row sums")
        if k is not None and U.shape[1] != k:
            logger.error(f"Assignment matrix has {U.shape[1]} columns, expected {k}")
            raise ValueError("Assignment matrix column count must equal k")
        labels = np.argmax(U, axis=1)
    else:
        logger.error(f"Assignment of shape {U.shape}")
        raise ValueError("Assignment must be a label vector or an n x k matrix")
    if n is not None and labels.size != n:
        logger.error(f"Assignment covers {labels.size} terms, expected {n}")
        raise ValueError("Assignment length must equal n")
    return labels


def assemble_w(instance, cover):
    """Homogenized forms W_i = (A_i V - b_i e^T)^T (A_i V - b_i e^T), shape (n, m, m)."""
    if cover.d != instance.d:
        logger.error(f"Cover dimension {cover.d} does not match instance dimension {instance.d}")
        raise ValueError("Cover and instance dimensions differ")
    logger.info(f"Assembling {instance.n} quadratic forms of size {cover.m}")
    R = instance.A @ cover.V - instance.b[:, :, None]
    W = np.einsum('nli,nlj->nij', R, R)
    return (W + W.transpose(0, 2, 1)) / 2.0


def cluster_statistics(instance, members):
    """Normal-equation data (H, g, c) of the terms in `members`."""
    A = instance.A[members]
    b = instance.b[members]
    H = np.einsum('nli,nlj->ij', A, A)
    g = np.einsum('nli,nl->i', A, b)
    return H, g, float(np.sum(b * b))


def pinv_solve(H, g):
    """Minimum-norm solution of H x = g through an eigendecomposition cut at PINV_RCOND."""
    w, Q = np.linalg.eigh((H + H.T) / 2.0)
    cutoff = PINV_RCOND * max(w.max(), 0.0)
    keep = w > cutoff
    if not keep.any():
        return np.zeros(H.shape[0])
    Qk = Q[:, keep]
    return Qk @ ((Qk.T @ g) / w[keep])


def fit_center(H, g, c, normalized=0):
    """Optimal center and cost of one cluster given its normal-equation data.

    Unconstrained: x = H^+ g with cost c - g^T H^+ g. With `normalized` r > 0 the first r
    coordinates form a unit vector (g is zero): the free block is eliminated and the unit
    part is the lowest eigenvector of the Schur complement, signed into the upper half-space.
    """
    if not normalized:
        x = pinv_solve(H, g)
        return x, max(c - float(g @ x), 0.0)

    r = normalized
    Huu, Huw, Hww = H[:r, :r], H[:r, r:], H[r:, r:]
    if Hww.size:
        F = np.column_stack([pinv_solve(Hww, col) for col in Huw]) if Huw.size else np.zeros((Hww.shape[0], r))
        S = Huu - Huw @ F
    else:
        F = np.zeros((0, r))
        S = Huu
    w, Q = np.linalg.eigh((S + S.T) / 2.0)
    u = Q[:, 0]
    if u[np.flatnonzero(np.abs(u) > 1e-12)[-1]] < 0:
        u = -u
    x = np.concatenate([u, -F @ u])
    return x, max(float(x @ H @ x), 0.0)


def optimal_centers(instance, U):
    """Optimal centers for a fixed assignment, and the tuple of empty cluster indices."""
    labels = as_labels(U, n=instance.n, k=instance.k)
    logger.info(f"Computing optimal centers for {instance.k} clusters")
    centers = np.zeros((instance.k, instance.d))
    empty = []
    for j in range(instance.k):
        members = np.flatnonzero(labels == j)
        if members.size == 0:
            empty.append(j)
            if instance.normalized:
                centers[j, instance.normalized - 1] = 1.0
            logger.warning(f"Cluster {j} is empty")
            continue
        H, g, c = cluster_statistics(instance, members)
        centers[j], _ = fit_center(H, g, c, instance.normalized)
    return centers, tuple(empty)


def objective(instance, U, centers):
    """sum_ij u_ij ||A_i x_j - b_i||^2."""
    labels = as_labels(U, n=instance.n)
    centers = np.asarray(centers, dtype=float)
    if centers.ndim == 1:
        centers = centers.reshape(-1, instance.d)
    if centers.shape[1] != instance.d or labels.max() >= centers.shape[0]:
        logger.error(f"Centers of shape {centers.shape} do not fit labels and d={instance.d}")
        raise ValueError("Centers must be (k, d) and cover every label")
    residual = np.einsum('nld,nd->nl', instance.A, centers[labels]) - instance.b
    return float(np.sum(residual * residual))


def solution_for(instance, labels):
    """ClusterSolution with optimal centers for the given labels."""
    labels = as_labels(labels, n=instance.n, k=instance.k)
    centers, empty = optimal_centers(instance, labels)
    return ClusterSolution(labels, centers, objective(instance, labels, centers), empty)


def lift_affine(points, k=1, **kwargs):
    """Homogeneous lift: a_i -> A_i = (a_i, 1), b_i = 0; center (x, z) scores (<a_i, x> + z)^2."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    A = np.hstack([points, np.ones((n, 1))])[:, None, :]
    kwargs.setdefault('family', 'affine')
    return ClusterInstance(A, np.zeros((n, 1)), k, points=points, **kwargs)


def _upper_normal(rng, d):
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    return -v if v[-1] < 0 else v


def _draw_separated(rng, k, draw, distance, min_separation):
    chosen = []
    for _ in range(GEN_MAX_DRAWS):
        candidate = draw()
        if all(distance(candidate, other) >= min_separation for other in chosen):
            chosen.append(candidate)
            if len(chosen) == k:
                return np.array(chosen)
    logger.error(f"Could not place {k} centers at separation {min_separation}")
    raise ValueError("Minimum separation too large for the requested k")


def _normal_distance(u, v):
    return min(np.linalg.norm(u - v), np.linalg.norm(u + v))


def _in_plane_points(rng, normals, labels, noise):
    d = normals.shape[1]
    points = np.empty((labels.size, d))
    for i, j in enumerate(labels):
        direction = rng.standard_normal(d)
        direction -= (direction @ normals[j]) * normals[j]
        norm = np.linalg.norm(direction)
        direction = direction / norm if norm > 1e-12 else direction
        points[i] = rng.uniform(0.2, 1.0) * direction + noise * rng.standard_normal(d)
    return points


def gen_euclidean(k, n, d=2, spread=GEN_SPREAD, seed=0, min_separation=GEN_MIN_SEPARATION):
    """Gaussian blobs around k separated centers in [-1, 1]^d, labels assigned round robin."""
    if k < 1 or n < k or d < 1:
        logger.error(f"Invalid generator parameters k={k}, n={n}, d={d}")
        raise ValueError("Need 1 <= k <= n and d >= 1")
    logger.info(f"Generating Euclidean instance k={k}, n={n}, d={d}, seed={seed}")
    rng = np.random.default_rng(seed)
    centers = _draw_separated(rng, k, lambda: rng.uniform(-1.0, 1.0, d),
                              lambda u, v: np.linalg.norm(u - v), min_separation)
    labels = np.arange(n) % k
    points = centers[labels] + spread * rng.standard_normal((n, d))
    instance = ClusterInstance.euclidean(points, k, name=f"euclidean-s{seed}", family='euclidean')
    truth = ClusterSolution(labels, centers, objective(instance, labels, centers))
    return instance, truth


def gen_hyperplane(k, n, d=2, noise=GEN_NOISE, seed=0, min_separation=GEN_MIN_SEPARATION):
    """Rows a_i near k hyperplanes through the origin; b_i = 0, centers are unit normals."""
    if k < 1 or n < k or d < 2:
        logger.error(f"Invalid generator parameters k={k}, n={n}, d={d}")
        raise ValueError("Need 1 <= k <= n and d >= 2")
    logger.info(f"Generating hyperplane instance k={k}, n={n}, d={d}, seed={seed}")
    rng = np.random.default_rng(seed)
    normals = _draw_separated(rng, k, lambda: _upper_normal(rng, d), _normal_distance, min_separation)
    labels = np.arange(n) % k
    rows = _in_plane_points(rng, normals, labels, noise)
    instance = ClusterInstance(rows[:, None, :], np.zeros((n, 1)), k, name=f"hyperplane-s{seed}",
                               family='hyperplane', normalized=d)
    truth = ClusterSolution(labels, normals, objective(instance, labels, normals))
    return instance, truth


def gen_affine(k, n, d=2, noise=GEN_NOISE, seed=0, z_max=CYLINDER_Z_MAX, min_separation=GEN_MIN_SEPARATION):
    """Points near k affine hyperplanes <a, x> + z = 0, returned as the lifted instance."""
    if k < 1 or n < k or d < 2:
        logger.error(f"Invalid generator parameters k={k}, n={n}, d={d}")
        raise ValueError("Need 1 <= k <= n and d >= 2")
    logger.info(f"Generating affine instance k={k}, n={n}, d={d}, seed={seed}")
    rng = np.random.default_rng(seed)
    normals = _draw_separated(rng, k, lambda: _upper_normal(rng, d), _normal_distance, min_separation)
    offsets = rng.uniform(-z_max, z_max, k)
    labels = np.arange(n) % k
    points = _in_plane_points(rng, normals, labels, noise) - offsets[labels, None] * normals[labels]
    instance = lift_affine(points, k, name=f"affine-s{seed}", normalized=d)
    centers = np.hstack([normals, offsets[:, None]])
    truth = ClusterSolution(labels, centers, objective(instance, labels, centers))
    return instance, truth


GENERATORS = {
    'euclidean': gen_euclidean,
    'hyperplane': gen_hyperplane,
    'affine': gen_affine,
}


def save_instance(path, instance, truth=None):
    data = instance.to_dict()
    if truth is not None:
        data['ground_truth'] = truth.to_dict()
    with open(path, 'w') as f:
        json.dump(data, f, indent=1)
    logger.info(f"Wrote instance {instance.name} to {path}")


def load_instance(path):
    """Instance and optional ground truth from a JSON file."""
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        logger.error(f"Invalid instance JSON in {path}: {e}")
        raise ValueError(f"Invalid instance JSON: {e}")
    instance = ClusterInstance.from_dict(data)
    truth = ClusterSolution.from_dict(data['ground_truth']) if 'ground_truth' in data else None
    return instance, truth
