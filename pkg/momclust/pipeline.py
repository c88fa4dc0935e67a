"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

"""
Cover descriptors and the assemble -> solve -> round -> exact pipeline shared by the CLI.
"""

import json
import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from momclust.config import (RELAXATION_R2PP1, RELAXATION_R2P1, ORDER_DNN, TRIANGLE_BULGE, CYLINDER_Z_MAX,
                             RECOVERY_TOL)
from momclust.geometry import (Cover, grid_cover, minimal_cover, discrete_cover, semicircle_polygon_cover,
                               semicircle_triangle_cover, semicircle_cylinder_cover, minimal_bulge)
from momclust.instance import assemble_w
from momclust.logger import logger
from momclust.oracle import exact_cluster
from momclust.relaxation import ASSEMBLERS, add_block_quadratic_eq
from momclust.rounding import round_solution, lloyd_polish, SPACE_LAMBDA
from momclust.solver import InteriorPointSolver, SolverStatus


def _counts(text, d=None):
    counts = [int(part) for part in text.split('x')]
    if any(c < 1 for c in counts):
        raise ValueError(f"counts must be positive in '{text}'")
    if d is not None and len(counts) == 1:
        counts = counts * d
    if d is not None and len(counts) != d:
        raise ValueError(f"'{text}' gives {len(counts)} counts for dimension {d}")
    return counts


def _load_sites(path):
    with open(path) as f:
        data = json.load(f)
    if isinstance(data, dict):
        data = data.get('sites')
    if not isinstance(data, list):
        raise ValueError(f"{path} must hold a list of sites or {{'sites': [...]}}")
    return np.asarray(data, dtype=float)


def parse_cover(descriptor, instance):
    """Build a cover from a descriptor.

    grid:AxB | minimal | discrete:FILE | discrete:circle:N | discrete:grid:AxB |
    semicircle:N | semicircle-tri:N[,BULGE] | cylinder:AxB[,ZMAX]
    """
    kind, _, arg = descriptor.partition(':')
    try:
        if kind == 'grid':
            lower, upper = instance.center_box()
            return grid_cover(lower, upper, _counts(arg, instance.d))
        if kind == 'minimal':
            points = instance.b if instance.family == 'euclidean' else np.array(instance.center_box())
            return minimal_cover(points)
        if kind == 'discrete':
            source, _, rest = arg.partition(':')
            if source == 'circle':
                count = int(rest)
                angles = 2.0 * math.pi * np.arange(count) / count
                cover = discrete_cover(np.column_stack([np.cos(angles), np.sin(angles)]))
            elif source == 'grid':
                lower, upper = instance.center_box()
                counts = _counts(rest, instance.d)
                ticks = [np.linspace(lower[a], upper[a], counts[a]) for a in range(instance.d)]
                cover = discrete_cover(np.stack(np.meshgrid(*ticks, indexing='ij'), axis=-1).reshape(-1, instance.d))
            else:
                cover = discrete_cover(_load_sites(arg))
            cover.label = descriptor
            return cover
        if kind == 'semicircle':
            return semicircle_polygon_cover(int(arg))
        if kind == 'semicircle-tri':
            segments, _, bulge = arg.partition(',')
            segments = int(segments)
            bulge = float(bulge) if bulge else max(TRIANGLE_BULGE, 1.05 * minimal_bulge(segments))
            return semicircle_triangle_cover(segments, bulge)
        if kind == 'cylinder':
            counts, _, z_max = arg.partition(',')
            arc_segments, z_levels = _counts(counts, 2)
            return semicircle_cylinder_cover(arc_segments, z_levels, float(z_max) if z_max else CYLINDER_Z_MAX)
        if kind == 'file':
            with open(arg) as f:
                return Cover.from_dict(json.load(f))
    except (ValueError, OSError, json.JSONDecodeError) as e:
        logger.error(f"Invalid cover descriptor '{descriptor}': {e}")
        raise ValueError(f"Invalid cover descriptor '{descriptor}': {e}")
    logger.error(f"Unknown cover kind '{kind}'")
    raise ValueError(f"Unknown cover kind '{kind}' in '{descriptor}'")


@dataclass
class RunReport:
    """Summary of one pipeline run."""

    instance: str
    cover: str
    relaxation: str
    status: str
    lp: bool
    iterations: int
    bound: float = None
    rounded: float = None
    exact: float = None
    recovered: bool = None
    polished: float = None
    times: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True, eq=False)
class PipelineResult:
    report: RunReport
    relaxation: object
    solution: object
    rounded: object = None
    exact: object = None


def unit_norm_matrix(instance):
    """Q with x^T Q x the squared norm of the constrained center coordinates."""
    weights = np.zeros(instance.d)
    weights[:instance.normalized or instance.d] = 1.0
    return np.diag(weights)


def run_pipeline(instance, cover, relaxation=RELAXATION_R2PP1, config=None, order=ORDER_DNN,
                 unit_norm=False, space=SPACE_LAMBDA, exact=False, polish=False):
    """Assemble, solve and round one relaxation; optionally run the exact oracle."""
    logger.info(f"Pipeline: {instance.name} / {cover.label} / {relaxation}")
    times = {}
    started = time.perf_counter()
    W = assemble_w(instance, cover)
    if relaxation == RELAXATION_R2PP1:
        problem = ASSEMBLERS[relaxation](W, cover, instance.k, order=order)
    elif relaxation == RELAXATION_R2P1:
        problem = ASSEMBLERS[relaxation](W, cover, instance.k)
    else:
        logger.error(f"Unknown relaxation '{relaxation}'")
        raise ValueError(f"Relaxation must be one of {sorted(ASSEMBLERS)}")
    if unit_norm:
        problem = add_block_quadratic_eq(problem, unit_norm_matrix(instance), 1.0)
    times['assemble'] = time.perf_counter() - started

    started = time.perf_counter()
    solution = problem.extract(InteriorPointSolver(config).solve(problem.sdp))
    times['solve'] = time.perf_counter() - started

    report = RunReport(instance.name, cover.label, relaxation, solution.status.value, problem.is_lp,
                       solution.iterations, times=times)
    if solution.status == SolverStatus.OPTIMAL:
        report.bound = solution.bound

    rounded = None
    if solution.status in (SolverStatus.OPTIMAL, SolverStatus.MAX_ITERATIONS):
        started = time.perf_counter()
        rounded = round_solution(instance, cover, solution, space=space)
        report.rounded = rounded.objective
        if polish:
            report.polished = lloyd_polish(instance, rounded).objective
        times['round'] = time.perf_counter() - started

    result_exact = None
    if exact:
        started = time.perf_counter()
        result_exact = exact_cluster(instance)
        report.exact = result_exact.optimum
        times['exact'] = time.perf_counter() - started
        if report.rounded is not None:
            report.recovered = bool(report.rounded <= report.exact + RECOVERY_TOL * max(1.0, abs(report.exact)))
    logger.info(f"Pipeline done: status={report.status}, bound={report.bound}, rounded={report.rounded}, "
                f"exact={report.exact}")
    return PipelineResult(report, problem, solution, rounded, result_exact)


def solution_blob(instance, result):
    """JSON-ready record of a run for plotting and inspection."""
    cover = result.relaxation.cover
    blob = {
        'instance': instance.name,
        'family': instance.family,
        'k': instance.k,
        'normalized': instance.normalized,
        'relaxation': result.relaxation.kind,
        'status': result.solution.status.value,
        'bound': result.report.bound,
        'cover': cover.to_dict(),
        'lambdas': result.solution.lambdas().tolist(),
        'estimates': (result.solution.lambdas() @ cover.V.T).tolist(),
    }
    points = instance.display_points()
    if points is not None:
        blob['points'] = np.asarray(points).tolist()
    if result.rounded is not None:
        blob['rounded'] = result.rounded.to_dict()
    if result.exact is not None:
        blob['exact'] = result.exact.solution.to_dict()
    return blob
