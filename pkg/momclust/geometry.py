"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

"""
Simplex covers of the center space.

A cover is a list of simplices (blocks) whose vertices are stored as the columns of one
matrix V, so that a point of block s is x = V lambda with lambda supported on the column
range v(s). Vertices shared between blocks are duplicated on purpose: the block-diagonal
support pattern is what the relaxations rely on.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from momclust.config import GEOMETRY_TOL, ARC_SAMPLES, CYLINDER_Z_MAX
from momclust.logger import logger


class Simplex:
    """A simplex in R^d spanned by 1 to d+1 affinely independent vertices."""

    def __init__(self, vertices):
        vertices = np.array(vertices, dtype=float)
        if vertices.ndim == 1:
            vertices = vertices[None, :]
        if vertices.ndim != 2 or vertices.shape[0] == 0 or vertices.shape[1] == 0:
            logger.error(f"Invalid simplex vertex array of shape {vertices.shape}")
            raise ValueError("Simplex needs a non-empty list of vertices of equal dimension")

        size, dim = vertices.shape
        if size > dim + 1:
            logger.error(f"Simplex with {size} vertices in dimension {dim}")
            raise ValueError(f"A simplex in R^{dim} has at most {dim + 1} vertices, got {size}")
        if size > 1:
            edges = vertices[1:] - vertices[0]
            lengths = np.linalg.norm(edges, axis=1)
            if lengths.min() <= GEOMETRY_TOL * max(1.0, float(np.abs(vertices).max())):
                logger.error("Simplex has coincident vertices")
                raise ValueError("Simplex vertices must be affinely independent")
            # Scale-free test on unit edges.
            unit = edges / lengths[:, None]
            if np.linalg.eigvalsh(unit @ unit.T).min() <= GEOMETRY_TOL:
                logger.error("Simplex vertices are affinely dependent")
                raise ValueError("Simplex vertices must be affinely independent")

        vertices.setflags(write=False)
        self.vertices = vertices
        self.size = size
        self.dim = dim
        # Augmented system [V; e^T] lambda = [x; 1] has full column rank.
        self._system = np.vstack([vertices.T, np.ones(size)])
        self._solver = np.linalg.pinv(self._system)

    @property
    def columns(self):
        """Vertex matrix V_s with one vertex per column."""
        return self.vertices.T

    def coordinates(self, points):
        """Least-squares barycentric coordinates and residuals for a batch of points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        rhs = np.hstack([points, np.ones((points.shape[0], 1))])
        coeffs = rhs @ self._solver.T
        residuals = np.linalg.norm(coeffs @ self._system.T - rhs, axis=1)
        return coeffs, residuals

    def contains(self, points, tol=GEOMETRY_TOL):
        coeffs, residuals = self.coordinates(points)
        return (residuals <= tol) & (coeffs.min(axis=1) >= -tol)

    def __repr__(self):
        return f"Simplex({self.vertices.tolist()})"


def barycentric(simplex, x, tol=GEOMETRY_TOL):
    """Barycentric coordinates of x in the simplex, or None when x lies outside.

    For lower-dimensional simplices the coordinates solve the least-squares system and
    x counts as inside only when the residual is within tolerance.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (simplex.dim,):
        logger.error(f"Point of dimension {x.shape[0]} tested against simplex in R^{simplex.dim}")
        raise ValueError("Point and simplex dimensions differ")
    coeffs, residuals = simplex.coordinates(x)
    if residuals[0] > tol or coeffs[0].min() < -tol:
        return None
    return coeffs[0]


class Cover:
    """An ordered collection of simplices covering (part of) the center space."""

    def __init__(self, blocks, label=None):
        blocks = tuple(block if isinstance(block, Simplex) else Simplex(block) for block in blocks)
        if not blocks:
            logger.error("Cover without blocks")
            raise ValueError("A cover needs at least one block")
        dims = {block.dim for block in blocks}
        if len(dims) != 1:
            logger.error(f"Cover blocks of mixed dimension {sorted(dims)}")
            raise ValueError("All cover blocks must live in the same dimension")

        self.blocks = blocks
        self.d = dims.pop()
        self.q = len(blocks)
        self.block_sizes = tuple(block.size for block in blocks)
        self.block_offsets = np.concatenate([[0], np.cumsum(self.block_sizes)]).astype(int)
        self.m = int(self.block_offsets[-1])
        self.V = np.hstack([block.columns for block in blocks])
        self.V.setflags(write=False)
        self.block_of = np.repeat(np.arange(self.q), self.block_sizes)
        self.label = label or f"custom:{self.q}"
        logger.debug(f"Cover {self.label}: d={self.d}, q={self.q}, m={self.m}")

    def block_range(self, s):
        """Column slice v(s) of block s in V."""
        return slice(int(self.block_offsets[s]), int(self.block_offsets[s + 1]))

    @property
    def is_discrete(self):
        return all(size == 1 for size in self.block_sizes)

    def omega(self):
        return omega(self)

    def contains(self, points, tol=GEOMETRY_TOL):
        """Boolean matrix (points x blocks) of block membership."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.d:
            logger.error(f"Points of dimension {points.shape[1]} tested against a cover in R^{self.d}")
            raise ValueError("Point and cover dimensions differ")
        return np.column_stack([block.contains(points, tol) for block in self.blocks])

    def locate(self, x):
        """Indices of all blocks containing x."""
        return [int(s) for s in np.flatnonzero(self.contains(x)[0])]

    def embed(self, s, coefficients):
        """Lift local barycentric coefficients of block s to a vector in R^m."""
        coefficients = np.asarray(coefficients, dtype=float)
        weights = np.zeros(self.m)
        weights[self.block_range(s)] = coefficients
        return weights

    def point(self, weights):
        return self.V @ np.asarray(weights, dtype=float)

    def to_dict(self):
        return {
            'label': self.label,
            'blocks': [block.vertices.tolist() for block in self.blocks],
        }

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict) or 'blocks' not in data:
            logger.error("Cover data without 'blocks'")
            raise ValueError("Cover JSON must contain a 'blocks' list")
        return cls(data['blocks'], label=data.get('label'))

    def __repr__(self):
        return f"Cover({self.label}, d={self.d}, q={self.q}, m={self.m})"


@dataclass(frozen=True, eq=False)
class ConstrainedSimplexPoint:
    """A point of the constrained simplex: a probability vector supported on one block."""

    weights: np.ndarray
    active_block: int


def constrained_point(cover, s, coefficients):
    """Build a ConstrainedSimplexPoint from barycentric coefficients of block s."""
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape != (cover.block_sizes[s],):
        logger.error(f"Block {s} has {cover.block_sizes[s]} vertices, got {coefficients.shape}")
        raise ValueError("Coefficient count does not match the block")
    if coefficients.min() < -GEOMETRY_TOL or abs(coefficients.sum() - 1.0) > 1e-12:
        logger.error(f"Coefficients {coefficients} are not a probability vector")
        raise ValueError("Coefficients must be nonnegative and sum to one")
    return ConstrainedSimplexPoint(cover.embed(s, np.clip(coefficients, 0.0, None)), int(s))


def omega(cover):
    """Orthogonality mask: zero on the diagonal blocks v(s) x v(s), one elsewhere."""
    labels = cover.block_of
    return (labels[:, None] != labels[None, :]).astype(float)


def grid_cover(lower, upper, subdivisions):
    """Kuhn triangulation of an axis-aligned box split into a regular grid of cells.

    Every cell is split into d! simplices, one per axis permutation, walking from the
    lower cell corner along the axes in permutation order.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if lower.shape != upper.shape or lower.ndim != 1:
        logger.error(f"Bounding box corners of shapes {lower.shape} and {upper.shape}")
        raise ValueError("Bounding box corners must be vectors of equal length")
    if np.any(upper - lower <= 0):
        logger.error(f"Degenerate bounding box [{lower}, {upper}]")
        raise ValueError("Bounding box has zero extent along some axis")
    d = lower.size
    counts = np.broadcast_to(np.atleast_1d(np.asarray(subdivisions, dtype=int)), (d,))
    if np.any(counts < 1):
        logger.error(f"Invalid subdivisions {counts}")
        raise ValueError("Subdivisions must be at least 1 per axis")

    logger.info(f"Building grid cover with {counts.tolist()} cells over [{lower}, {upper}]")
    ticks = [np.linspace(lower[a], upper[a], counts[a] + 1) for a in range(d)]
    permutations = list(itertools.permutations(range(d)))
    blocks = []
    for cell in itertools.product(*(range(c) for c in counts)):
        for perm in permutations:
            index = list(cell)
            vertices = [[ticks[a][index[a]] for a in range(d)]]
            for axis in perm:
                index[axis] += 1
                vertices.append([ticks[a][index[a]] for a in range(d)])
            blocks.append(Simplex(vertices))
    return Cover(blocks, label='grid:' + 'x'.join(str(c) for c in counts))


def minimal_cover(points):
    """One simplex (a scaled standard simplex) containing all points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        logger.error("Minimal cover of an empty point set")
        raise ValueError("Minimal cover needs at least one point")
    d = points.shape[1]
    lo = points.min(axis=0)
    width = float((points.max(axis=0) - lo).max())
    margin = 0.05 * (1.0 + width)
    origin = lo - margin
    edge = d * (width + 2.0 * margin)
    vertices = [origin] + [origin + edge * np.eye(d)[a] for a in range(d)]
    logger.info(f"Minimal cover with origin {origin} and edge {edge}")
    return Cover([Simplex(vertices)], label='minimal')


def discrete_cover(sites):
    """One single-vertex block per site."""
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    if sites.shape[0] == 0:
        logger.error("Discrete cover without sites")
        raise ValueError("Discrete cover needs at least one site")
    if sites.shape[0] > 1 and pdist(sites).min() <= GEOMETRY_TOL:
        logger.error("Duplicate sites in discrete cover")
        raise ValueError("Discrete cover sites must be pairwise distinct")
    logger.info(f"Discrete cover with {sites.shape[0]} sites")
    return Cover([Simplex(site[None, :]) for site in sites], label=f"discrete:{sites.shape[0]}")


def _arc_vertices(segments):
    angles = np.linspace(0.0, math.pi, segments + 1)
    return np.column_stack([np.cos(angles), np.sin(angles)])


def semicircle_polygon_cover(segments):
    """Polygonal line through equispaced points of the upper unit semicircle."""
    if segments < 2:
        logger.error(f"Semicircle polygon with {segments} segments")
        raise ValueError("Semicircle polygon needs at least 2 segments")
    vertices = _arc_vertices(segments)
    blocks = [Simplex(vertices[j:j + 2]) for j in range(segments)]
    return Cover(blocks, label=f"semicircle:{segments}")


def minimal_bulge(segments):
    """Smallest bulge for which the triangle over each arc piece contains the arc."""
    return 1.0 / math.cos(math.pi / (2 * segments)) - 1.0


def semicircle_triangle_cover(segments, bulge):
    """Triangles over the polygon chords, apex pushed radially out to radius 1 + bulge."""
    if segments < 2:
        logger.error(f"Semicircle triangle cover with {segments} segments")
        raise ValueError("Semicircle triangle cover needs at least 2 segments")
    if bulge <= 0:
        logger.error(f"Non-positive bulge {bulge}")
        raise ValueError("Bulge must be positive")

    vertices = _arc_vertices(segments)
    step = math.pi / segments
    blocks = []
    for j in range(segments):
        mid = (j + 0.5) * step
        apex = (1.0 + bulge) * np.array([math.cos(mid), math.sin(mid)])
        blocks.append(Simplex([vertices[j], vertices[j + 1], apex]))
    cover = Cover(blocks, label=f"semicircle-tri:{segments},{bulge!r}")

    angles = np.linspace(0.0, math.pi, ARC_SAMPLES)
    arc = np.column_stack([np.cos(angles), np.sin(angles)])
    covered = cover.contains(arc).any(axis=1)
    if not covered.all():
        logger.error(f"Bulge {bulge} leaves {int((~covered).sum())} arc samples uncovered")
        raise ValueError(f"Bulge {bulge} is too small to cover the arc (need >= {minimal_bulge(segments):.6f})")
    return cover


def semicircle_cylinder_cover(arc_segments, z_levels, z_max=CYLINDER_Z_MAX):
    """Semicircle polygon at each of z_levels offsets in [-z_max, z_max], as segments in R^3."""
    if arc_segments < 2 or z_levels < 1 or z_max < 0:
        logger.error(f"Invalid cylinder cover parameters {arc_segments}, {z_levels}, {z_max}")
        raise ValueError("Cylinder cover needs >= 2 arc segments, >= 1 level and z_max >= 0")
    arc = _arc_vertices(arc_segments)
    levels = np.linspace(-z_max, z_max, z_levels) if z_levels > 1 else np.zeros(1)
    blocks = []
    for z in levels:
        for j in range(arc_segments):
            blocks.append(Simplex([[arc[j, 0], arc[j, 1], z], [arc[j + 1, 0], arc[j + 1, 1], z]]))
    return Cover(blocks, label=f"cylinder:{arc_segments}x{z_levels},{z_max!r}")


def is_separated(cover, centers):
    """True when no block of the cover holds more than one of the centers.

    A center on a shared face belongs to the lowest-index block containing it.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    membership = cover.contains(centers)
    outside = np.flatnonzero(~membership.any(axis=1))
    if outside.size:
        logger.error(f"Centers {outside.tolist()} lie outside the cover")
        raise ValueError("Every center must lie in the cover")
    owner = np.argmax(membership, axis=1)
    counts = np.bincount(owner, minlength=cover.q)
    logger.debug(f"Centers per block: {counts.tolist()}")
    return bool(counts.max() <= 1)
