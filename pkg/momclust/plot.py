"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

"""
Static SVG rendering of a solved run.

Euclidean runs show data points as circles, cover simplices as outlines, local estimates
x_i = V lambda_i as small crosses and rounded centers as large crosses. Hyperplane runs
draw centers and estimates as lines through the origin; affine runs draw the lines
<a, x> + z = 0 in the data plane.
"""

import io

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
from matplotlib.collections import LineCollection, PolyCollection
import numpy as np

from momclust.logger import logger

FIGURE_INCHES = 5.0
LINE_VIEW = 1.5
VIEW_PAD = 0.05
PALETTE = ('#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b', '#e377c2', '#17becf')
ESTIMATE_COLOR = '#7f7f7f'
COVER_COLOR = '#bbbbbb'
# Fixed element ids and text kept as text give byte-identical files.
SVG_STYLE = {'svg.hashsalt': 'momclust', 'svg.fonttype': 'none'}


def _colors(indices):
    return [PALETTE[int(i) % len(PALETTE)] for i in indices]


def _draw_cover(ax, cover):
    polygons, segments, sites = [], [], []
    for block in cover.get('blocks', []):
        vertices = np.asarray(block, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            continue
        if len(vertices) == 1:
            sites.append(vertices[0])
        elif len(vertices) == 2:
            segments.append(vertices)
        else:
            polygons.append(vertices)
    if polygons:
        ax.add_collection(PolyCollection(polygons, facecolor='none', edgecolor=COVER_COLOR, linewidth=0.8))
    if segments:
        ax.add_collection(LineCollection(segments, colors=COVER_COLOR, linewidth=1.5))
    if sites:
        sites = np.array(sites)
        ax.scatter(sites[:, 0], sites[:, 1], marker='s', s=10, color=COVER_COLOR)


def _axline(ax, normal, offset, **style):
    """Draw {p : <normal, p> + offset = 0}; degenerate normals are skipped."""
    normal = np.asarray(normal, dtype=float)
    norm = float(np.linalg.norm(normal))
    if norm < 1e-12:
        return None
    base = -offset * normal / norm ** 2
    direction = np.array([-normal[1], normal[0]])
    return ax.axline(tuple(base), tuple(base + direction), **style)


def draw(blob, title=None):
    """Matplotlib figure for a solution blob written by the solve command."""
    if not isinstance(blob, dict) or 'points' not in blob or 'estimates' not in blob:
        logger.error("Solution data lacks points or estimates")
        raise ValueError("Solution file must contain 'points' and 'estimates'")
    points = np.asarray(blob['points'], dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        logger.error(f"Cannot plot data of shape {points.shape}")
        raise ValueError("Only two-dimensional data can be plotted")
    family = blob.get('family', 'euclidean')
    estimates = np.asarray(blob['estimates'], dtype=float)
    rounded = blob.get('rounded') or {}
    labels = np.asarray(rounded.get('labels', [0] * len(points)), dtype=int)
    centers = np.asarray(rounded.get('centers', []), dtype=float)
    cover = blob.get('cover', {})
    logger.info(f"Rendering {family} plot with {len(points)} points")

    fig, ax = plt.subplots(figsize=(FIGURE_INCHES, FIGURE_INCHES))
    ax.set_aspect('equal')
    if family in ('hyperplane', 'affine'):
        ax.set_xlim(-LINE_VIEW, LINE_VIEW)
        ax.set_ylim(-LINE_VIEW, LINE_VIEW)
        if family == 'hyperplane':
            _draw_cover(ax, cover)
        for estimate in estimates:
            normal, offset = (estimate[:2], estimate[2]) if family == 'affine' else (estimate, 0.0)
            _axline(ax, normal, offset, color=ESTIMATE_COLOR, linewidth=0.4, linestyle='--')
        for j, center in enumerate(centers):
            normal, offset = (center[:2], center[2]) if family == 'affine' else (center, 0.0)
            _axline(ax, normal, offset, color=PALETTE[j % len(PALETTE)], linewidth=1.6)
    else:
        extent = [points]
        for block in cover.get('blocks', []):
            extent.append(np.asarray(block, dtype=float).reshape(-1, 2))
        if centers.size:
            extent.append(centers.reshape(-1, 2))
        stacked = np.vstack(extent)
        lower, upper = stacked.min(axis=0), stacked.max(axis=0)
        pad = VIEW_PAD * max(float(np.max(upper - lower)), 1e-6)
        ax.set_xlim(lower[0] - pad, upper[0] + pad)
        ax.set_ylim(lower[1] - pad, upper[1] + pad)
        _draw_cover(ax, cover)
        if estimates.size:
            ax.scatter(estimates[:, 0], estimates[:, 1], marker='x', s=12, linewidths=0.8, color=ESTIMATE_COLOR)
        if centers.size:
            ax.scatter(centers[:, 0], centers[:, 1], marker='x', s=90, linewidths=2.0,
                       color=_colors(range(len(centers))))
    ax.scatter(points[:, 0], points[:, 1], s=18, facecolors='none', edgecolors=_colors(labels), linewidths=1.2)
    if title:
        ax.set_title(title, fontsize=10)
    return fig


def render_svg(blob, title=None):
    """SVG document for a solution blob; identical input gives identical bytes."""
    with plt.rc_context(SVG_STYLE):
        fig = draw(blob, title=title)
        try:
            buffer = io.StringIO()
            fig.savefig(buffer, format='svg', metadata={'Date': None})
        finally:
            plt.close(fig)
    return buffer.getvalue()
