"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

"""
Primal-dual interior-point method for BlockSDP programs.

Infeasible-start path following with the HKM search direction and a Mehrotra
predictor-corrector step. The Schur complement of the Newton system is formed densely
and factored by Cholesky. PSD blocks of equal size are stacked so that products,
inverses and eigendecompositions run batched.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from momclust.config import (SOLVER_MAX_ITERATIONS, SOLVER_GAP_TOL, SOLVER_FEAS_TOL, SOLVER_STEP_FRACTION,
                             SOLVER_MIN_STEP, SOLVER_REGULARIZATION, SOLVER_MAX_NONMONOTONE, SOLVER_INFEAS_TOL,
                             SOLVER_SIGMA_FLOOR, SOLVER_SIGMA_LAGGING, PRESOLVE_RANK_TOL, PRESOLVE_DENSE_LIMIT)
from momclust.logger import logger

_HEADER = ("iter |       pobj        |       dobj        |   pinf   |   dinf   |   gap    |    mu    "
           "|  step_p  |  step_d")


class SolverStatus(str, enum.Enum):
    OPTIMAL = 'optimal'
    INFEASIBLE = 'infeasible'
    MAX_ITERATIONS = 'max-iterations'
    NUMERICAL_ERROR = 'numerical-error'


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = SOLVER_MAX_ITERATIONS
    gap_tolerance: float = SOLVER_GAP_TOL
    feasibility_tolerance: float = SOLVER_FEAS_TOL
    step_fraction: float = SOLVER_STEP_FRACTION
    min_step: float = SOLVER_MIN_STEP
    regularization: float = SOLVER_REGULARIZATION
    max_nonmonotone: int = SOLVER_MAX_NONMONOTONE
    sigma_floor: float = SOLVER_SIGMA_FLOOR
    sigma_lagging: float = SOLVER_SIGMA_LAGGING
    infeasibility_tolerance: float = SOLVER_INFEAS_TOL
    presolve_dense_limit: int = PRESOLVE_DENSE_LIMIT

    def __post_init__(self):
        if self.max_iterations < 1 or self.max_nonmonotone < 0 or self.presolve_dense_limit < 0:
            logger.error(f"Invalid solver counts in {self}")
            raise ValueError("Iteration limits must be positive")
        for name in ('gap_tolerance', 'feasibility_tolerance', 'step_fraction', 'min_step',
                     'regularization', 'infeasibility_tolerance', 'sigma_floor', 'sigma_lagging'):
            value = getattr(self, name)
            if not 0 < value < 1:
                logger.error(f"Solver setting {name}={value} outside (0, 1)")
                raise ValueError(f"{name} must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class ConicSolution:
    """Primal blocks X and orthant part x, dual multipliers y, dual slacks S and s."""

    X: list
    x: np.ndarray
    y: np.ndarray
    S: list
    s: np.ndarray
    primal_objective: float
    dual_objective: float
    iterations: int
    status: SolverStatus
    primal_infeasibility: float = math.nan
    dual_infeasibility: float = math.nan
    gap: float = math.nan
    certificate: np.ndarray = None
    history: list = field(default_factory=list)
    dropped_rows: tuple = ()


@dataclass(frozen=True, eq=False)
class PresolveResult:
    sdp: object
    row_map: np.ndarray
    certificate: np.ndarray = None

    @property
    def infeasible(self):
        return self.certificate is not None


class ConeLayout:
    """Flat vector layout of the cone variables.

    PSD blocks are grouped by size; each group is one contiguous stack (count, p, p) in
    row-major order, followed by the orthant part.
    """

    def __init__(self, psd_sizes, nonneg_count):
        self.sizes = np.asarray(psd_sizes, dtype=int)
        self.nonneg = int(nonneg_count)
        self.groups = []
        self.block_start = np.zeros(self.sizes.size, dtype=int)
        offset = 0
        for p in sorted(set(self.sizes.tolist())):
            ids = np.flatnonzero(self.sizes == p)
            self.groups.append((p, ids, offset))
            self.block_start[ids] = offset + np.arange(ids.size) * p * p
            offset += ids.size * p * p
        self.lp_start = offset
        self.size = offset + self.nonneg
        self.degree = int(self.sizes.sum()) + self.nonneg
        self._pattern = None

    def stacks(self, v):
        return [v[start:start + ids.size * p * p].reshape(ids.size, p, p) for p, ids, start in self.groups]

    def lp(self, v):
        return v[self.lp_start:]

    def _map(self, fn_stack, fn_lp, *vectors):
        out = np.empty(self.size)
        parts = [self.stacks(v) for v in vectors]
        for g, (p, ids, start) in enumerate(self.groups):
            out[start:start + ids.size * p * p] = fn_stack(*[part[g] for part in parts]).reshape(-1)
        out[self.lp_start:] = fn_lp(*[self.lp(v) for v in vectors])
        return out

    def operator(self, sdp):
        """Sparse constraint matrix (rows x flat size)."""
        rows, cols, data = [], [], []
        if sdp.eq_psd.size:
            r, b, i, j, v = (sdp.eq_psd[:, 0].astype(int), sdp.eq_psd[:, 1].astype(int), sdp.eq_psd[:, 2].astype(int),
                             sdp.eq_psd[:, 3].astype(int), sdp.eq_psd[:, 4])
            p = self.sizes[b]
            start = self.block_start[b]
            off = i != j
            rows += [r, r[off]]
            cols += [start + i * p + j, (start + j * p + i)[off]]
            data += [v, v[off]]
        if sdp.eq_lp.size:
            rows.append(sdp.eq_lp[:, 0].astype(int))
            cols.append(self.lp_start + sdp.eq_lp[:, 1].astype(int))
            data.append(sdp.eq_lp[:, 2])
        if not rows:
            return sp.csr_matrix((sdp.num_rows, self.size))
        return sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(sdp.num_rows, self.size))

    def cost(self, sdp):
        c = np.zeros(self.size)
        if sdp.cost_psd.size:
            b, i, j, v = (sdp.cost_psd[:, 0].astype(int), sdp.cost_psd[:, 1].astype(int),
                          sdp.cost_psd[:, 2].astype(int), sdp.cost_psd[:, 3])
            p = self.sizes[b]
            start = self.block_start[b]
            np.add.at(c, start + i * p + j, v)
            off = i != j
            np.add.at(c, (start + j * p + i)[off], v[off])
        c[self.lp_start:] = sdp.cost_lp
        return c

    def identity(self):
        return self._map(lambda s: np.broadcast_to(np.eye(s.shape[1]), s.shape), np.ones_like, np.zeros(self.size))

    def product(self, u, v):
        return self._map(np.matmul, np.multiply, u, v)

    def inverse(self, v):
        return self._map(np.linalg.inv, np.reciprocal, v)

    def symmetrize(self, v):
        return self._map(lambda s: (s + s.transpose(0, 2, 1)) / 2.0, lambda x: x, v)

    def inner(self, u, v):
        return float(u @ v)

    def min_eigenvalue(self, v):
        values = [np.linalg.eigvalsh((s + s.transpose(0, 2, 1)) / 2.0).min() for s in self.stacks(v) if s.size]
        if self.nonneg:
            values.append(self.lp(v).min())
        return float(min(values)) if values else 0.0

    def max_step(self, v, dv):
        """Largest alpha with v + alpha dv in the cone (v interior), inf when unbounded."""
        step = math.inf
        for s, ds in zip(self.stacks(v), self.stacks(dv)):
            w, Q = np.linalg.eigh(s)
            if w.min() <= 0:
                return 0.0
            R = Q / np.sqrt(w)[:, None, :]
            T = R.transpose(0, 2, 1) @ ds @ R
            lowest = np.linalg.eigvalsh((T + T.transpose(0, 2, 1)) / 2.0).min()
            if lowest < 0:
                step = min(step, -1.0 / lowest)
        x, dx = self.lp(v), self.lp(dv)
        falling = dx < 0
        if falling.any():
            step = min(step, float((-x[falling] / dx[falling]).min()))
        return step

    def scaling(self, X, Zinv):
        """Sparse block-diagonal K with K vec(H) = vec(X H Z^-1) and diag(x / z) on the orthant."""
        if self._pattern is None:
            rows, cols = [], []
            for p, ids, start in self.groups:
                base = start + np.arange(ids.size) * p * p
                local = np.arange(p * p)
                rows.append(np.broadcast_to(base[:, None, None] + local[None, :, None], (ids.size, p * p, p * p)).ravel())
                cols.append(np.broadcast_to(base[:, None, None] + local[None, None, :], (ids.size, p * p, p * p)).ravel())
            lp_index = self.lp_start + np.arange(self.nonneg)
            self._pattern = (np.concatenate(rows + [lp_index]), np.concatenate(cols + [lp_index]))
        data = []
        for (p, ids, start), xs, zs in zip(self.groups, self.stacks(X), self.stacks(Zinv)):
            data.append(np.einsum('tac,tdb->tabcd', xs, zs).reshape(-1))
        data.append(self.lp(X) * self.lp(Zinv))
        return sp.csr_matrix((np.concatenate(data), self._pattern), shape=(self.size, self.size))

    def split(self, v):
        blocks = [None] * self.sizes.size
        for (p, ids, start), stack in zip(self.groups, self.stacks(v)):
            for pos, b in enumerate(ids):
                blocks[b] = np.array(stack[pos])
        return blocks, np.array(self.lp(v))

    def norm(self, v):
        return float(np.linalg.norm(v))


def presolve(sdp, dense_limit=PRESOLVE_DENSE_LIMIT, tol=PRESOLVE_RANK_TOL):
    """Drop empty and linearly dependent equality rows.

    Rows owning a variable that no other remaining row touches are independent and are
    peeled off repeatedly. The remainder goes through a pivoted QR factorization when it
    has at most `dense_limit` rows. Inconsistent rows make the program infeasible; the
    result then carries a Farkas ray y with A^T y = 0 and b^T y = 1.
    """
    logger.info(f"Presolving {sdp.num_rows} equality rows")
    layout = ConeLayout(sdp.psd_sizes, sdp.nonneg_count)
    A = layout.operator(sdp)
    A.eliminate_zeros()
    b = sdp.rhs
    rows = sdp.num_rows
    rhs_tol = 1e-9 * (1.0 + (np.abs(b).max() if rows else 0.0))

    scale = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
    empty = scale <= tol
    for r in np.flatnonzero(empty):
        if abs(b[r]) > rhs_tol:
            logger.warning(f"Row {r} reads 0 = {b[r]}")
            ray = np.zeros(rows)
            ray[r] = 1.0 / b[r]
            return PresolveResult(sdp, np.arange(rows), ray)
    if empty.any():
        logger.warning(f"Dropping {int(empty.sum())} empty rows")

    pattern = A.copy()
    pattern.data = np.ones_like(pattern.data)
    pattern = pattern.tocsr()
    remaining = ~empty
    independent = np.zeros(rows, dtype=bool)
    while remaining.any():
        active = np.flatnonzero(remaining)
        sub = pattern[active]
        counts = np.asarray(sub.sum(axis=0)).ravel()
        owners = np.asarray(sub[:, counts == 1].sum(axis=1)).ravel() > 0
        if not owners.any():
            break
        independent[active[owners]] = True
        remaining[active[owners]] = False
    logger.debug(f"Structural peeling kept {int(independent.sum())} rows, {int(remaining.sum())} left")

    dropped = []
    rest = np.flatnonzero(remaining)
    if rest.size > dense_limit:
        logger.warning(f"Skipping rank check on {rest.size} rows (limit {dense_limit})")
        independent[rest] = True
    elif rest.size:
        block = A[rest]
        touched = np.unique(block.indices)
        dense = block[:, touched].toarray()
        _, R, piv = scipy.linalg.qr(dense.T, mode='economic', pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > tol * max(diag[0], 1.0))) if diag.size else 0
        keep, drop = rest[piv[:rank]], rest[piv[rank:]]
        independent[keep] = True
        if drop.size:
            basis = dense[piv[:rank]]
            coeffs = np.linalg.lstsq(basis.T, dense[piv[rank:]].T, rcond=None)[0]
            mismatch = b[drop] - coeffs.T @ b[keep]
            bad = np.flatnonzero(np.abs(mismatch) > rhs_tol)
            if bad.size:
                r = bad[0]
                logger.warning(f"Row {drop[r]} contradicts the rows it depends on (gap {mismatch[r]})")
                ray = np.zeros(rows)
                ray[drop[r]] = 1.0
                ray[keep] = -coeffs[:, r]
                return PresolveResult(sdp, np.arange(rows), ray / mismatch[r])
            dropped = drop.tolist()
            logger.warning(f"Dropping {drop.size} linearly dependent rows")

    row_map = np.flatnonzero(independent)
    logger.info(f"Presolve kept {row_map.size} of {rows} rows")
    return PresolveResult(sdp.select_rows(row_map) if row_map.size != rows else sdp, row_map)


class InteriorPointSolver:
    """Solves BlockSDP programs to the tolerances of a SolverConfig."""

    def __init__(self, config=None):
        self.config = config or SolverConfig()
        logger.info(f"Initialized InteriorPointSolver with {self.config}")

    def solve(self, sdp):
        cfg = self.config
        logger.info(f"Solving {sdp}")
        pre = presolve(sdp, dense_limit=cfg.presolve_dense_limit)
        layout = ConeLayout(sdp.psd_sizes, sdp.nonneg_count)
        if pre.infeasible:
            return self._verdict(sdp, layout, pre.certificate)

        reduced = pre.sdp
        A = layout.operator(reduced)
        At = A.T.tocsr()
        c = layout.cost(reduced)
        b = reduced.rhs
        nu = layout.degree
        eye = layout.identity()
        norm_b, norm_c = np.linalg.norm(b), np.linalg.norm(c)

        row_norms = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
        xi = max(10.0, math.sqrt(nu), math.sqrt(nu) * float(np.max((1.0 + np.abs(b)) / (1.0 + row_norms), initial=0.0)))
        eta = max(10.0, math.sqrt(nu), norm_c, float(np.max(row_norms, initial=0.0)))
        X = xi * eye
        Z = eta * eye
        y = np.zeros(b.size)

        history = []
        best = None
        status = SolverStatus.MAX_ITERATIONS
        certificate = None
        stalled = 0
        start = None
        logger.debug(_HEADER)

        for iteration in range(cfg.max_iterations + 1):
            rp = b - A @ X
            rd = c - Z - At @ y
            pobj, dobj = float(c @ X), float(b @ y)
            complementarity = float(X @ Z)
            mu = complementarity / nu
            pinf = float(np.linalg.norm(rp)) / (1.0 + norm_b)
            dinf = float(np.linalg.norm(rd)) / (1.0 + norm_c)
            gap = max(complementarity, abs(pobj - dobj)) / (1.0 + abs(pobj) + abs(dobj))
            record = {'iter': iteration, 'pobj': pobj, 'dobj': dobj, 'pinf': pinf, 'dinf': dinf,
                      'gap': gap, 'mu': mu, 'step_p': history[-1]['next_p'] if history else 0.0,
                      'step_d': history[-1]['next_d'] if history else 0.0}
            history.append(record)
            logger.debug(f"{iteration:4d} | {pobj: .10e} | {dobj: .10e} | {pinf:.2e} | {dinf:.2e} | "
                         f"{gap:.2e} | {mu:.2e} | {record['step_p']:.2e} | {record['step_d']:.2e}")

            merit = max(pinf, dinf, gap)
            if best is None or merit < best[0]:
                best = (merit, X, y, Z, iteration, pinf, dinf, gap)
                stalled = 0
            elif pinf > cfg.feasibility_tolerance and history[:-1] and dobj > history[-2]['dobj']:
                stalled = 0
            else:
                stalled += 1
            if start is None:
                start = (max(pinf, 1e-300), max(dinf, 1e-300), max(mu, 1e-300))

            if pinf <= cfg.feasibility_tolerance and dinf <= cfg.feasibility_tolerance and gap <= cfg.gap_tolerance:
                status = SolverStatus.OPTIMAL
                break
            if pinf > cfg.feasibility_tolerance and dobj > 0:
                ray = self._farkas_ray(layout, At, b, y)
                if ray is not None:
                    certificate = ray
                    status = SolverStatus.INFEASIBLE
                    break
            if iteration == cfg.max_iterations:
                break
            if stalled > cfg.max_nonmonotone:
                logger.warning(f"No progress on max(pinf, dinf, gap) for {stalled} iterations")
                status = SolverStatus.NUMERICAL_ERROR
                break
            infeasible = max(pinf, dinf) > cfg.feasibility_tolerance
            lagging = infeasible and max(pinf / start[0], dinf / start[1]) > mu / start[2]

            Zinv = layout.inverse(Z)
            try:
                factor, M = self._factor(A, layout.scaling(X, Zinv))
            except np.linalg.LinAlgError as e:
                logger.warning(f"Newton system breakdown at iteration {iteration}: {e}")
                status = SolverStatus.NUMERICAL_ERROR
                break

            XZ = layout.product(X, Z)
            XrdZinv = layout.product(layout.product(X, rd), Zinv)
            # Predictor: affine-scaling direction.
            dXa, dya, dZa = self._direction(layout, A, At, factor, M, X, Zinv, rp, rd, XrdZinv, -XZ)
            ap, ad = self._steps(layout, cfg, X, dXa, Z, dZa, lagging)
            mu_aff = float((X + ap * dXa) @ (Z + ad * dZa)) / nu
            sigma = min(1.0, max(0.0, mu_aff / mu) ** 3) if mu > 0 else 0.0
            # Residuals shrink by (1 - step); mu must not outrun them.
            if infeasible:
                sigma = max(sigma, cfg.sigma_lagging if lagging else cfg.sigma_floor)
            # Corrector: centering plus second-order term.
            R = sigma * mu * eye - XZ - layout.product(dXa, dZa)
            dX, dy, dZ = self._direction(layout, A, At, factor, M, X, Zinv, rp, rd, XrdZinv, R)
            ap, ad = self._steps(layout, cfg, X, dX, Z, dZ, lagging)
            history[-1]['next_p'], history[-1]['next_d'] = ap, ad
            if max(ap, ad) < cfg.min_step:
                logger.warning(f"Step lengths collapsed ({ap:.2e}, {ad:.2e}) at iteration {iteration}")
                status = SolverStatus.NUMERICAL_ERROR
                break
            X = layout.symmetrize(X + ap * dX)
            y = y + ad * dy
            Z = layout.symmetrize(Z + ad * dZ)

        for record in history:
            record.pop('next_p', None)
            record.pop('next_d', None)

        if status == SolverStatus.INFEASIBLE:
            full = np.zeros(sdp.num_rows)
            full[pre.row_map] = certificate
            return self._verdict(sdp, layout, full, iterations=iteration, history=history)
        if status != SolverStatus.OPTIMAL:
            _, X, y, Z, iteration, pinf, dinf, gap = best
            logger.warning(f"Solver stopped with status {status.value}; returning iterate {iteration}")

        full_y = np.zeros(sdp.num_rows)
        full_y[pre.row_map] = y
        Xb, x = layout.split(X)
        Sb, s = layout.split(Z)
        dropped = tuple(int(r) for r in np.setdiff1d(np.arange(sdp.num_rows), pre.row_map))
        solution = ConicSolution(Xb, x, full_y, Sb, s, float(c @ X), float(b @ y), iteration, status,
                                 pinf, dinf, gap, None, history, dropped)
        logger.info(f"Solver finished: {status.value} after {iteration} iterations, "
                    f"pobj={solution.primal_objective:.10g}, dobj={solution.dual_objective:.10g}")
        return solution

    @staticmethod
    def _steps(layout, cfg, X, dX, Z, dZ, common):
        """Fraction-to-boundary step lengths; one shared length while the residuals lag behind mu."""
        ap = min(1.0, cfg.step_fraction * layout.max_step(X, dX))
        ad = min(1.0, cfg.step_fraction * layout.max_step(Z, dZ))
        if common:
            ap = ad = min(ap, ad)
        return ap, ad

    def _factor(self, A, K):
        M = (A @ K @ A.T).toarray()
        M = (M + M.T) / 2.0
        if M.size == 0:
            return None, M
        reg = self.config.regularization * max(1.0, float(np.abs(np.diag(M)).max()))
        for attempt in range(3):
            try:
                return scipy.linalg.cho_factor(M + reg * np.eye(M.shape[0]), lower=True), M
            except np.linalg.LinAlgError:
                logger.debug(f"Cholesky failed with regularization {reg:.1e}")
                reg *= 1e4
        raise np.linalg.LinAlgError("Schur complement is not positive definite after regularization")

    def _direction(self, layout, A, At, factor, M, X, Zinv, rp, rd, XrdZinv, R):
        """Newton step solving A dX = rp, A^T dy + dZ = rd, dX Z + X dZ = R (symmetrized)."""
        rhs = rp - A @ layout.product(R, Zinv) + A @ XrdZinv
        if factor is None:
            dy = np.zeros(0)
        else:
            dy = scipy.linalg.cho_solve(factor, rhs)
            dy += scipy.linalg.cho_solve(factor, rhs - M @ dy)
        dZ = rd - At @ dy
        dX = layout.symmetrize(layout.product(R - layout.product(X, dZ), Zinv))
        return dX, dy, dZ

    def _farkas_ray(self, layout, At, b, y):
        """y / b^T y when -A^T y lies in the cone up to the certificate tolerance."""
        by = float(b @ y)
        if by <= 0:
            return None
        ray = y / by
        violation = max(0.0, -layout.min_eigenvalue(-(At @ ray)))
        if violation <= self.config.infeasibility_tolerance:
            logger.info(f"Primal infeasibility certificate found (cone violation {violation:.2e})")
            return ray
        return None

    def _verdict(self, sdp, layout, certificate, iterations=0, history=None):
        logger.info("Program is infeasible")
        zero = np.zeros(layout.size)
        Xb, x = layout.split(zero)
        Sb, s = layout.split(zero)
        return ConicSolution(Xb, x, np.zeros(sdp.num_rows), Sb, s, math.nan, math.nan, iterations,
                             SolverStatus.INFEASIBLE, certificate=certificate, history=history or [])


def solve(sdp, config=None):
    return InteriorPointSolver(config).solve(sdp)
