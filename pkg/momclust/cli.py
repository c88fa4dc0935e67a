"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

"""
Command-line front end: instance generation, relaxation solving, exact comparison, plots,
benchmark sweeps and raw BlockSDP solves.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from momclust import blocksdp
from momclust.config import (LOG_ENV_VAR, LOG_LEVEL_DEFAULT, RELAXATION_R2PP1, RELAXATION_R2P1, ORDER_DNN,
                             ORDER_PSD, SOLVER_MAX_ITERATIONS, SOLVER_GAP_TOL, SOLVER_FEAS_TOL, GEN_SPREAD,
                             GEN_NOISE, GEN_MIN_SEPARATION, CYLINDER_Z_MAX, ORACLE_MAX_PARTITIONS, EXIT_OK,
                             EXIT_USAGE, EXIT_INFEASIBLE, EXIT_MAX_ITERATIONS, EXIT_REFUSED)
from momclust.errors import SizeGuardError, SolverStatusError
from momclust.instance import GENERATORS, save_instance, load_instance
from momclust.logger import logger
from momclust.oracle import exact_cluster
from momclust.pipeline import parse_cover, run_pipeline, solution_blob
from momclust.plot import render_svg
from momclust.rounding import SPACE_LAMBDA, SPACE_X
from momclust.solver import InteriorPointSolver, SolverConfig, SolverStatus

LOG_LEVELS = {
    'quiet': logging.CRITICAL,
    'info': logging.INFO,
    'trace': logging.DEBUG,
}

STATUS_EXIT_CODES = {
    SolverStatus.OPTIMAL: EXIT_OK,
    SolverStatus.INFEASIBLE: EXIT_INFEASIBLE,
    SolverStatus.MAX_ITERATIONS: EXIT_MAX_ITERATIONS,
    SolverStatus.NUMERICAL_ERROR: EXIT_MAX_ITERATIONS,
}

BENCH_COLUMNS = ['seed', 'instance', 'cover', 'relaxation', 'status', 'lp', 'iterations', 'bound', 'rounded',
                 'exact', 'recovered', 'polished', 'error']
TIMING_COLUMNS = ['time_assemble', 'time_solve', 'time_round', 'time_exact']

FAMILY_PARAMS = {
    'euclidean': ('k', 'n', 'd', 'spread', 'min_separation'),
    'hyperplane': ('k', 'n', 'd', 'noise', 'min_separation'),
    'affine': ('k', 'n', 'd', 'noise', 'z_max', 'min_separation'),
}


def setup_logging(verbose):
    """Sets up logging from --verbose or the MOMENT_CLUSTER_LOG environment variable."""
    name = 'trace' if verbose else os.environ.get(LOG_ENV_VAR, LOG_LEVEL_DEFAULT).lower()
    if name not in LOG_LEVELS:
        print(f"Unknown {LOG_ENV_VAR} value '{name}', using '{LOG_LEVEL_DEFAULT}'", file=sys.stderr)
        name = LOG_LEVEL_DEFAULT
    logging.basicConfig(level=LOG_LEVELS[name], format='%(asctime)s - %(levelname)s - %(message)s')
    logger.setLevel(LOG_LEVELS[name])
    logger.debug("Logging initialized.")


def _number(value):
    if value is None:
        return '-'
    if isinstance(value, bool):
        return 'yes' if value else 'no'
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def display_results(reports):
    """Displays run reports in a fixed-width table."""
    logger.info("Displaying results.")
    print(f"{'Instance':<20} {'Cover':<18} {'Relax':>6} {'Status':>15} {'Iter':>5} {'Bound':>12} "
          f"{'Rounded':>12} {'Exact':>12} {'Recovered':>10}", file=sys.stderr)
    print("=" * 118, file=sys.stderr)
    for report in reports:
        print(f"{report.instance:<20} {report.cover:<18} {report.relaxation:>6} {report.status:>15} "
              f"{report.iterations:>5} {_number(report.bound):>12} {_number(report.rounded):>12} "
              f"{_number(report.exact):>12} {_number(report.recovered):>10}", file=sys.stderr)


def _write_text(path, text):
    if path == '-':
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, 'w') as f:
            f.write(text)
        logger.info(f"Wrote {path}")


def _write_json(path, data):
    _write_text(path, json.dumps(data, indent=1) + '\n')


def _solver_config(args):
    return SolverConfig(max_iterations=args.max_iterations, gap_tolerance=args.gap_tol,
                        feasibility_tolerance=args.feas_tol)


def handle_generate(args):
    params = {'k': args.k, 'n': args.n, 'd': args.d, 'seed': args.seed, 'min_separation': args.min_separation}
    if args.family == 'euclidean':
        params['spread'] = args.spread
    else:
        params['noise'] = args.noise
    if args.family == 'affine':
        params['z_max'] = args.z_max
    instance, truth = GENERATORS[args.family](**params)
    if args.out == '-':
        data = instance.to_dict()
        data['ground_truth'] = truth.to_dict()
        _write_json('-', data)
    else:
        save_instance(args.out, instance, truth)
    print(f"Generated {instance!r}", file=sys.stderr)
    return EXIT_OK


def handle_solve(args):
    instance, _ = load_instance(args.instance)
    if args.k is not None:
        instance = instance.with_k(args.k)
    cover = parse_cover(args.cover, instance)
    result = run_pipeline(instance, cover, relaxation=args.relaxation, config=_solver_config(args),
                          order=args.order, unit_norm=args.unit_norm, space=args.space, exact=args.exact)
    display_results([result.report])
    if args.out:
        _write_json(args.out, result.report.to_dict())
    if args.solution:
        _write_json(args.solution, solution_blob(instance, result))
    return STATUS_EXIT_CODES[result.solution.status]


def handle_exact(args):
    instance, _ = load_instance(args.instance)
    if args.k is not None:
        instance = instance.with_k(args.k)
    result = exact_cluster(instance, max_partitions=args.max_partitions)
    print(f"{'Instance':<20} {'n':>5} {'k':>3} {'Partitions':>12} {'Optimum':>16}", file=sys.stderr)
    print("=" * 60, file=sys.stderr)
    print(f"{instance.name:<20} {instance.n:>5} {instance.k:>3} {result.enumerated:>12} "
          f"{result.optimum:>16.10g}", file=sys.stderr)
    if args.out:
        data = {'instance': instance.name, 'optimum': result.optimum, 'enumerated': result.enumerated,
                'solution': result.solution.to_dict()}
        _write_json(args.out, data)
    return EXIT_OK


def handle_plot(args):
    try:
        with open(args.solution) as f:
            blob = json.load(f)
    except json.JSONDecodeError as e:
        logger.error(f"Invalid solution JSON in {args.solution}: {e}")
        raise ValueError(f"Invalid solution JSON: {e}")
    _write_text(args.out, render_svg(blob, title=args.title))
    return EXIT_OK


def _load_suite(path):
    with open(path) as f:
        data = json.load(f)
    sweeps = data if isinstance(data, list) else [data]
    for sweep in sweeps:
        if not isinstance(sweep, dict):
            raise ValueError("Each suite entry must be an object")
        family = sweep.get('family', 'euclidean')
        if family not in GENERATORS:
            raise ValueError(f"Unknown family '{family}' in suite")
    return sweeps


def _bench_jobs(sweeps):
    """Expand suite entries into (seed, cover, relaxation, sweep) rows."""
    jobs = []
    for sweep in sweeps:
        for seed in sweep.get('seeds', []):
            for cover in sweep.get('covers', []):
                for relaxation in sweep.get('relaxations', [RELAXATION_R2PP1]):
                    jobs.append((seed, cover, relaxation, sweep))
    return jobs


def _bench_row(job, config):
    seed, cover_spec, relaxation, sweep = job
    family = sweep.get('family', 'euclidean')
    params = {key: sweep[key] for key in FAMILY_PARAMS[family] if key in sweep}
    row = {'seed': seed, 'instance': '', 'cover': cover_spec, 'relaxation': relaxation, 'error': ''}
    try:
        instance, _ = GENERATORS[family](seed=seed, **params)
        row['instance'] = instance.name
        cover = parse_cover(cover_spec, instance)
        result = run_pipeline(instance, cover, relaxation=relaxation, config=config,
                              order=sweep.get('order', ORDER_DNN), unit_norm=sweep.get('unit_norm', False),
                              space=sweep.get('space', SPACE_LAMBDA), exact=sweep.get('exact', True),
                              polish=sweep.get('polish', False))
    except (ValueError, TypeError, OSError) as e:
        logger.warning(f"Bench row seed={seed} cover={cover_spec} failed: {e}")
        row['error'] = f"{type(e).__name__}: {e}"
        return row, None
    report = result.report
    row.update({key: getattr(report, key) for key in BENCH_COLUMNS if hasattr(report, key) and key != 'cover'})
    row['instance'] = report.instance
    for key in TIMING_COLUMNS:
        row[key] = report.times.get(key[len('time_'):])
    return row, report


def _csv_value(value):
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def handle_bench(args):
    sweeps = _load_suite(args.suite)
    jobs = _bench_jobs(sweeps)
    logger.info(f"Running {len(jobs)} benchmark rows with {args.jobs} workers")
    config = _solver_config(args)
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        outcomes = list(pool.map(lambda job: _bench_row(job, config), jobs))
    outcomes.sort(key=lambda outcome: (outcome[0]['seed'], outcome[0]['cover'], outcome[0]['relaxation'],
                                       outcome[0]['instance']))

    columns = BENCH_COLUMNS + (TIMING_COLUMNS if args.timings else [])
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    for row, _ in outcomes:
        writer.writerow([_csv_value(row.get(column)) for column in columns])
    _write_text(args.out, buffer.getvalue())

    reports = [report for _, report in outcomes if report is not None]
    if reports:
        display_results(reports)
    judged = [report for report in reports if report.recovered is not None]
    failed = sum(1 for row, _ in outcomes if row['error'])
    if judged:
        rate = sum(report.recovered for report in judged) / len(judged)
        print(f"Recovery rate: {rate:.3f} ({sum(report.recovered for report in judged)}/{len(judged)})",
              file=sys.stderr)
    if failed:
        print(f"{failed} of {len(outcomes)} rows failed", file=sys.stderr)
    return EXIT_OK


def handle_sdp(args):
    sdp = blocksdp.load(args.dump)
    solution = InteriorPointSolver(_solver_config(args)).solve(sdp)
    print(f"{'Rows':>6} {'Blocks':>7} {'Orthant':>8} {'Status':>15} {'Iter':>5} {'Primal':>18} {'Dual':>18}",
          file=sys.stderr)
    print("=" * 82, file=sys.stderr)
    print(f"{sdp.num_rows:>6} {len(sdp.psd_sizes):>7} {sdp.nonneg_count:>8} {solution.status.value:>15} "
          f"{solution.iterations:>5} {solution.primal_objective:>18.10g} {solution.dual_objective:>18.10g}",
          file=sys.stderr)
    if args.out:
        _write_json(args.out, {'status': solution.status.value, 'iterations': solution.iterations,
                               'primal_objective': solution.primal_objective,
                               'dual_objective': solution.dual_objective,
                               'y': solution.y.tolist()})
    return STATUS_EXIT_CODES[solution.status]


def _add_solver_flags(parser):
    parser.add_argument('--max-iterations', type=int, default=SOLVER_MAX_ITERATIONS,
                        help='Interior-point iteration limit')
    parser.add_argument('--gap-tol', type=float, default=SOLVER_GAP_TOL, help='Relative duality gap tolerance')
    parser.add_argument('--feas-tol', type=float, default=SOLVER_FEAS_TOL, help='Relative feasibility tolerance')


def build_parser():
    parser = argparse.ArgumentParser(prog='momclust',
                                     description='Affine subspace clustering by moment relaxations')
    subparsers = parser.add_subparsers(dest='command')

    parser.add_argument('--verbose', action='store_true', help='Enable trace logging.')

    generate_parser = subparsers.add_parser('generate', help='Generate a synthetic instance')
    generate_parser.add_argument('family', choices=sorted(GENERATORS), help='Instance family')
    generate_parser.add_argument('--k', type=int, default=3, help='Number of clusters')
    generate_parser.add_argument('--n', type=int, default=60, help='Number of terms')
    generate_parser.add_argument('--d', type=int, default=2, help='Data dimension')
    generate_parser.add_argument('--seed', type=int, default=0, help='Random seed')
    generate_parser.add_argument('--spread', type=float, default=GEN_SPREAD, help='Euclidean blob deviation')
    generate_parser.add_argument('--noise', type=float, default=GEN_NOISE, help='Hyperplane noise level')
    generate_parser.add_argument('--z-max', type=float, default=CYLINDER_Z_MAX, help='Affine offset range')
    generate_parser.add_argument('--min-separation', type=float, default=GEN_MIN_SEPARATION,
                                 help='Minimum distance between true centers')
    generate_parser.add_argument('--out', default='-', help='Instance JSON path or "-" for stdout')

    solve_parser = subparsers.add_parser('solve', help='Solve a relaxation and round it')
    solve_parser.add_argument('--instance', required=True, help='Instance JSON file')
    solve_parser.add_argument('--cover', required=True, help='Cover descriptor, e.g. grid:3x3 or semicircle:8')
    solve_parser.add_argument('--relaxation', default=RELAXATION_R2PP1, choices=[RELAXATION_R2PP1, RELAXATION_R2P1])
    solve_parser.add_argument('--k', type=int, default=None, help='Override the number of clusters')
    solve_parser.add_argument('--order', default=ORDER_DNN, choices=[ORDER_DNN, ORDER_PSD])
    solve_parser.add_argument('--space', default=SPACE_LAMBDA, choices=[SPACE_LAMBDA, SPACE_X],
                              help='Rounding space')
    solve_parser.add_argument('--unit-norm', action='store_true', help='Constrain centers to unit norm')
    solve_parser.add_argument('--exact', action='store_true', help='Run the brute-force oracle too')
    solve_parser.add_argument('--out', default=None, help='Report JSON path or "-" for stdout')
    solve_parser.add_argument('--solution', default=None, help='Solution JSON path for plotting')
    _add_solver_flags(solve_parser)

    exact_parser = subparsers.add_parser('exact', help='Brute-force the clustering optimum')
    exact_parser.add_argument('--instance', required=True, help='Instance JSON file')
    exact_parser.add_argument('--k', type=int, default=None, help='Override the number of clusters')
    exact_parser.add_argument('--max-partitions', type=int, default=ORACLE_MAX_PARTITIONS, help="Enumeration cap")
    exact_parser.add_argument('--out', default=None, help='Result JSON path or "-" for stdout')

    plot_parser = subparsers.add_parser('plot', help='Render a solution file as SVG')
    plot_parser.add_argument('solution', help='Solution JSON written by solve --solution')
    plot_parser.add_argument('--out', default='-', help='SVG path or "-" for stdout')
    plot_parser.add_argument('--title', default=None, help='Caption drawn above the plot')

    bench_parser = subparsers.add_parser('bench', help='Run a benchmark suite to CSV')
    bench_parser.add_argument('suite', help='Suite JSON file')
    bench_parser.add_argument('--jobs', type=int, default=1, help='Concurrent rows')
    bench_parser.add_argument('--out', default='-', help='CSV path or "-" for stdout')
    bench_parser.add_argument('--timings', action='store_true', help='Add wall time columns')
    _add_solver_flags(bench_parser)

    sdp_parser = subparsers.add_parser('sdp', help='Solve a BlockSDP dump file')
    sdp_parser.add_argument('dump', help='BlockSDP text dump')
    sdp_parser.add_argument('--out', default=None, help='Result JSON path or "-" for stdout')
    _add_solver_flags(sdp_parser)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_USAGE

    setup_logging(args.verbose)
    logger.debug(f"Parsed arguments: {args}")

    command_handlers = {
        'generate': handle_generate,
        'solve': handle_solve,
        'exact': handle_exact,
        'plot': handle_plot,
        'bench': handle_bench,
        'sdp': handle_sdp,
    }

    if args.command not in command_handlers:
        parser.print_help()
        return EXIT_USAGE
    if getattr(args, 'jobs', 1) < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return command_handlers[args.command](args)
    except SizeGuardError as e:
        print(f"Refused: {e}", file=sys.stderr)
        return EXIT_REFUSED
    except SolverStatusError as e:
        print(f"Solver did not converge: {e}", file=sys.stderr)
        return STATUS_EXIT_CODES.get(e.status, EXIT_MAX_ITERATIONS)
    except (ValueError, OSError, KeyError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
