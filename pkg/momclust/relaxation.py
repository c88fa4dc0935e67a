"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

"""
First-order moment relaxations of the clustering problem over a simplex cover.

Both relaxations work with second moments Lambda_ii of the block-supported barycentric
weights of datum i and the aggregate moment Lambda_** of all k centers.

* 'r2pp1' keeps only the diagonal blocks v(s) x v(s): per (i, s) a block P = (Lambda_ii)_{v(s)}
  and a difference block D = (Lambda_**)_{v(s)} - P, both doubly nonnegative, per s a block
  L = (Lambda_**)_{v(s)}. This is also the first level of the block-sparse hierarchy.
* 'r2p1' keeps the coupled 2m x 2m matrices [[Lambda_ii, Lambda_i*], [Lambda_*i, Lambda_**]],
  one per datum, with a shared Lambda_** and entrywise order Lambda_** >= Lambda_*i >= Lambda_ii >= 0.
"""

from dataclasses import dataclass

import numpy as np

from momclust.blocksdp import BlockSDPBuilder
from momclust.config import ORDER_DNN, ORDER_PSD, RELAXATION_R2P1, RELAXATION_R2PP1, R2P1_MAX_VERTICES
from momclust.errors import SizeGuardError, SolverStatusError
from momclust.logger import logger
from momclust.solver import InteriorPointSolver, SolverStatus


@dataclass(frozen=True, eq=False)
class RelaxationSolution:
    """Second-moment blocks read from a conic solution.

    lambda_blocks[i][s] is (Lambda_ii)_{v(s)}, star_blocks[s] is (Lambda_**)_{v(s)}.
    """

    lambda_blocks: tuple
    star_blocks: tuple
    bound: float
    status: SolverStatus
    kind: str
    iterations: int
    conic: object = None

    def lambdas(self):
        """Estimates lambda_i = Lambda_ii e as rows of an (n, m) array."""
        return np.array([np.concatenate([block.sum(axis=1) for block in blocks]) for blocks in self.lambda_blocks])


class MomentRelaxation:
    """An assembled relaxation: the BlockSDP plus the map from its variables to moments.

    `lambda_slots[i][s]` and `star_slots[s]` are (block, offset) pairs locating the
    diagonal block v(s) inside a PSD variable. `slacks` lists the orthant variables as
    (index, terms) with value sum(coef * X[block][a, b] for block, a, b, coef in terms).
    """

    def __init__(self, kind, sdp, cover, n, k, lambda_slots, star_slots, slacks, order=ORDER_DNN):
        self.kind = kind
        self.sdp = sdp
        self.cover = cover
        self.n = n
        self.k = k
        self.lambda_slots = lambda_slots
        self.star_slots = star_slots
        self.slacks = slacks
        self.order = order

    @property
    def is_lp(self):
        return self.sdp.is_lp

    def extract(self, conic):
        sizes = self.cover.block_sizes

        def read(slot, p):
            block, offset = slot
            return np.array(conic.X[block][offset:offset + p, offset:offset + p])

        lambda_blocks = tuple(tuple(read(self.lambda_slots[i][s], p) for s, p in enumerate(sizes))
                              for i in range(self.n))
        star_blocks = tuple(read(self.star_slots[s], p) for s, p in enumerate(sizes))
        bound = conic.dual_objective if conic.status == SolverStatus.OPTIMAL else float('nan')
        return RelaxationSolution(lambda_blocks, star_blocks, bound, conic.status, self.kind, conic.iterations, conic)

    def lift_assignment(self, labels, weights):
        """Primal point induced by an integer assignment and block-supported center weights.

        `weights` is (k, m); row j holds lambda^j of center j. Returns (blocks, orthant).
        """
        labels = np.asarray(labels, dtype=int)
        weights = np.atleast_2d(np.asarray(weights, dtype=float))
        star = weights.sum(axis=0)
        outer = {j: np.outer(weights[j], weights[j]) for j in range(weights.shape[0])}
        star_outer = sum(outer.values())
        blocks = [np.zeros((p, p)) for p in self.sdp.psd_sizes]
        m = self.cover.m
        if self.kind == RELAXATION_R2PP1:
            for s in range(self.cover.q):
                rng = self.cover.block_range(s)
                blocks[self.star_slots[s][0]] = star_outer[rng, rng].copy()
                for i in range(self.n):
                    P = outer[labels[i]][rng, rng]
                    blocks[self.lambda_slots[i][s][0]] = P.copy()
                    # the difference block D is created right after P
                    blocks[self.lambda_slots[i][s][0] + 1] = star_outer[rng, rng] - P
        else:
            for i in range(self.n):
                w = np.concatenate([weights[labels[i]], star])
                blocks[self.lambda_slots[i][0][0]] = np.outer(w, w)
            if m != len(star):
                logger.error("Weight length does not match the cover")
                raise ValueError("Weights must have one column per cover vertex")
        orthant = np.array([sum(coef * blocks[b][a, c] for b, a, c, coef in terms) for _, terms in self.slacks])
        return blocks, orthant

    def __repr__(self):
        return f"MomentRelaxation({self.kind}, n={self.n}, k={self.k}, {self.sdp})"


def _check_inputs(W, cover, k):
    W = np.asarray(W, dtype=float)
    if W.ndim != 3 or W.shape[1:] != (cover.m, cover.m):
        logger.error(f"Quadratic forms of shape {W.shape} for a cover with m={cover.m}")
        raise ValueError("Quadratic forms must be (n, m, m) with m from the cover")
    if not 1 <= k <= W.shape[0]:
        logger.error(f"k={k} outside [1, {W.shape[0]}]")
        raise ValueError("k must lie in [1, n]")
    return W


def _nonneg_entry(builder, slacks, terms):
    """Orthant variable tied to a linear combination of PSD entries."""
    index = builder.add_nonneg()
    row = builder.add_row(0.0)
    for blk, a, b, coef in terms:
        builder.add_entry(row, blk, a, b, coef)
    builder.add_nonneg_entry(row, index, -1.0)
    slacks.append((index, tuple(terms)))


def assemble_r2pp1(W, cover, k, order=ORDER_DNN):
    """Block-decoupled relaxation over the diagonal blocks of the cover."""
    W = _check_inputs(W, cover, k)
    if order not in (ORDER_DNN, ORDER_PSD):
        logger.error(f"Unknown order '{order}'")
        raise ValueError(f"Order must be '{ORDER_DNN}' or '{ORDER_PSD}'")
    n = W.shape[0]
    logger.info(f"Assembling r2pp1 relaxation: n={n}, q={cover.q}, m={cover.m}, k={k}, order={order}")

    builder = BlockSDPBuilder()
    star_slots = [(builder.add_psd_block(p), 0) for p in cover.block_sizes]
    lambda_slots = []
    slacks = []
    for i in range(n):
        slots = []
        for s, p in enumerate(cover.block_sizes):
            P = builder.add_psd_block(p)
            D = builder.add_psd_block(p)
            slots.append((P, 0))
            rng = cover.block_range(s)
            builder.add_cost_matrix(P, W[i][rng, rng])
            L = star_slots[s][0]
            for a in range(p):
                for b in range(a, p):
                    row = builder.add_row(0.0)
                    builder.add_entry(row, P, a, b, 1.0)
                    builder.add_entry(row, D, a, b, 1.0)
                    builder.add_entry(row, L, a, b, -1.0)
            if order == ORDER_DNN:
                for block in (P, D):
                    for a in range(p):
                        for b in range(a + 1, p):
                            _nonneg_entry(builder, slacks, [(block, a, b, 1.0)])
        lambda_slots.append(slots)
        row = builder.add_row(1.0)
        for (P, _), p in zip(slots, cover.block_sizes):
            builder.add_matrix(row, P, np.ones((p, p)))
    row = builder.add_row(float(k))
    for s, p in enumerate(cover.block_sizes):
        builder.add_matrix(row, star_slots[s][0], np.ones((p, p)))

    sdp = builder.build()
    logger.info(f"r2pp1 program: {len(sdp.psd_sizes)} blocks, {sdp.nonneg_count} orthant variables, {sdp.num_rows} rows")
    return MomentRelaxation(RELAXATION_R2PP1, sdp, cover, n, k, lambda_slots, star_slots, slacks, order)


def assemble_r2p1(W, cover, k, max_vertices=R2P1_MAX_VERTICES):
    """Coupled relaxation with one 2m x 2m moment block per datum."""
    W = _check_inputs(W, cover, k)
    m = cover.m
    if m > max_vertices:
        logger.error(f"r2p1 with m={m} exceeds the cap {max_vertices}")
        raise SizeGuardError(f"r2p1 needs m <= {max_vertices}, cover has m={m}", m, max_vertices)
    n = W.shape[0]
    logger.info(f"Assembling r2p1 relaxation: n={n}, q={cover.q}, m={m}, k={k}")

    block_of = cover.block_of
    builder = BlockSDPBuilder()
    slacks = []
    Y = [builder.add_psd_block(2 * m) for _ in range(n)]
    ones = np.ones(m)
    for i, blk in enumerate(Y):
        cost = np.zeros((2 * m, 2 * m))
        cost[:m, :m] = W[i]
        builder.add_cost_matrix(blk, cost)

        # (Lambda_i*)_{v(s)} = (Lambda_ii)_{v(s)}
        for s in range(cover.q):
            rng = range(cover.block_offsets[s], cover.block_offsets[s + 1])
            for a in rng:
                for b in rng:
                    row = builder.add_row(0.0)
                    builder.add_entry(row, blk, a, m + b, 1.0)
                    builder.add_entry(row, blk, a, b, -1.0)
        # (Lambda_** e)_{v(s)} = (Lambda_*i e)_{v(s)}
        for a in range(m):
            row = builder.add_row(0.0)
            for b in np.flatnonzero(block_of == block_of[a]):
                builder.add_entry(row, blk, m + a, m + b, 1.0)
            for b in range(m):
                builder.add_entry(row, blk, m + a, b, -1.0)
        # <Lambda_ii, Omega> = 0 with Lambda_ii >= 0: off-block entries vanish
        for a in range(m):
            for b in range(a + 1, m):
                if block_of[a] != block_of[b]:
                    row = builder.add_row(0.0)
                    builder.add_entry(row, blk, a, b, 1.0)
        # k Lambda_ii e = Lambda_i* e and k Lambda_*i e = Lambda_** e
        for a in range(m):
            row = builder.add_row(0.0)
            for b in range(m):
                builder.add_entry(row, blk, a, b, float(k))
                builder.add_entry(row, blk, a, m + b, -1.0)
            row = builder.add_row(0.0)
            for b in range(m):
                builder.add_entry(row, blk, m + a, b, float(k))
                builder.add_entry(row, blk, m + a, m + b, -1.0)
        row = builder.add_row(1.0)
        builder.add_matrix(row, blk, np.block([[np.outer(ones, ones), np.zeros((m, m))], [np.zeros((m, m)), np.zeros((m, m))]]))
        row = builder.add_row(float(k))
        for a in range(m):
            for b in range(m):
                builder.add_entry(row, blk, m + a, b, 1.0)
        # Lambda_** >= Lambda_*i >= Lambda_ii >= 0
        for a in range(m):
            for b in range(a + 1, m):
                if block_of[a] == block_of[b]:
                    _nonneg_entry(builder, slacks, [(blk, a, b, 1.0)])
        for a in range(m):
            for b in range(m):
                _nonneg_entry(builder, slacks, [(blk, m + a, b, 1.0), (blk, a, b, -1.0)])
                _nonneg_entry(builder, slacks, [(blk, m + a, m + b, 1.0), (blk, m + a, b, -1.0)])
        # shared Lambda_**
        if i > 0:
            for a in range(m):
                for b in range(a, m):
                    row = builder.add_row(0.0)
                    builder.add_entry(row, blk, m + a, m + b, 1.0)
                    builder.add_entry(row, Y[0], m + a, m + b, -1.0)

    lambda_slots = [[(blk, int(cover.block_offsets[s])) for s in range(cover.q)] for blk in Y]
    star_slots = [(Y[0], m + int(cover.block_offsets[s])) for s in range(cover.q)]
    sdp = builder.build()
    logger.info(f"r2p1 program: {len(sdp.psd_sizes)} blocks, {sdp.nonneg_count} orthant variables, {sdp.num_rows} rows")
    return MomentRelaxation(RELAXATION_R2P1, sdp, cover, n, k, lambda_slots, star_slots, slacks)


ASSEMBLERS = {
    RELAXATION_R2PP1: assemble_r2pp1,
    RELAXATION_R2P1: assemble_r2p1,
}


def add_block_quadratic_eq(relaxation, Q, c):
    """Add sum_s <(V^T Q V)_{v(s)}, (Lambda_ii)_{v(s)}> = c for every datum i.

    Under the block support of each lambda^j this is the moment form of x^T Q x = c.
    """
    Q = np.asarray(Q, dtype=float)
    cover = relaxation.cover
    if Q.shape != (cover.d, cover.d) or not np.allclose(Q, Q.T):
        logger.error(f"Quadratic constraint matrix of shape {Q.shape} is not symmetric d x d")
        raise ValueError("Q must be a symmetric d x d matrix")
    logger.info(f"Adding quadratic equality x^T Q x = {c} to {relaxation.n} data blocks")
    G = cover.V.T @ Q @ cover.V
    builder = BlockSDPBuilder.from_sdp(relaxation.sdp)
    for slots in relaxation.lambda_slots:
        row = builder.add_row(float(c))
        for s, (block, offset) in enumerate(slots):
            rng = cover.block_range(s)
            part = G[rng, rng]
            for a, b in zip(*np.triu_indices(part.shape[0])):
                coef = part[a, b] if a == b else 2.0 * part[a, b]
                builder.add_entry(row, block, offset + a, offset + b, coef)
    return MomentRelaxation(relaxation.kind, builder.build(), cover, relaxation.n, relaxation.k,
                            relaxation.lambda_slots, relaxation.star_slots, relaxation.slacks, relaxation.order)


def solve_relaxation(relaxation, config=None):
    return relaxation.extract(InteriorPointSolver(config).solve(relaxation.sdp))


def lower_bound(solution):
    """Relaxation optimum, a lower bound on the clustering optimum over the cover."""
    if solution.status != SolverStatus.OPTIMAL:
        logger.error(f"Lower bound requested from a {solution.status.value} solve")
        raise SolverStatusError(f"No lower bound: solver status is {solution.status.value}", solution.status)
    return solution.bound
