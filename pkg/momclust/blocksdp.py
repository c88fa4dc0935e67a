"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

"""
Standard-form block conic programs.

    minimize    sum_b <C_b, X_b> + c^T x
    subject to  sum_b <A_rb, X_b> + a_r^T x = rhs_r     for every row r
                X_b PSD,  x >= 0

Symmetric coefficient matrices are kept as upper-triangle entries (block, i, j, value),
i <= j, where an entry with i < j stands for `value` at both (i, j) and (j, i).

Text dump format (one record per line, '#' starts a comment, indices 0-based):

    momclust-blocksdp 1
    psd <count> <size> ...
    nonneg <count>
    rows <count>
    rhs <row> <value>
    c <block> <i> <j> <value>
    cx <index> <value>
    a <row> <block> <i> <j> <value>
    ax <row> <index> <value>

Values are written with repr so a dump followed by a load is bit-exact.
"""

import numpy as np

from momclust.logger import logger

DUMP_MAGIC = 'momclust-blocksdp'
DUMP_VERSION = 1


def _entry_array(entries, width):
    if len(entries) == 0:
        return np.zeros((0, width))
    return np.asarray(entries, dtype=float).reshape(-1, width)


class BlockSDP:
    """Immutable standard-form program over PSD blocks and a nonnegative orthant."""

    def __init__(self, psd_sizes, nonneg_count, rhs, cost_psd=(), cost_lp=None, eq_psd=(), eq_lp=()):
        self.psd_sizes = tuple(int(p) for p in psd_sizes)
        self.nonneg_count = int(nonneg_count)
        self.rhs = np.array(rhs, dtype=float).reshape(-1)
        self.cost_psd = _entry_array(cost_psd, 4)
        self.cost_lp = np.zeros(self.nonneg_count) if cost_lp is None else np.array(cost_lp, dtype=float).reshape(-1)
        self.eq_psd = _entry_array(eq_psd, 5)
        self.eq_lp = _entry_array(eq_lp, 3)
        self._validate()
        for array in (self.rhs, self.cost_psd, self.cost_lp, self.eq_psd, self.eq_lp):
            array.setflags(write=False)

    def _validate(self):
        if any(p < 1 for p in self.psd_sizes) or self.nonneg_count < 0:
            logger.error(f"Invalid cone sizes {self.psd_sizes}, nonneg={self.nonneg_count}")
            raise ValueError("PSD block sizes must be positive and the orthant size nonnegative")
        if not self.psd_sizes and not self.nonneg_count:
            logger.error("Program without variables")
            raise ValueError("Program needs at least one cone variable")
        if self.cost_lp.shape != (self.nonneg_count,):
            logger.error(f"Orthant cost of length {self.cost_lp.size}, expected {self.nonneg_count}")
            raise ValueError("Orthant cost length must equal the orthant size")
        sizes = np.asarray(self.psd_sizes + (1,), dtype=int)
        for name, blk, i, j in (('cost', self.cost_psd[:, 0], self.cost_psd[:, 1], self.cost_psd[:, 2]),
                                ('equality', self.eq_psd[:, 1], self.eq_psd[:, 2], self.eq_psd[:, 3])):
            if blk.size == 0:
                continue
            bad = (blk < 0) | (blk >= len(self.psd_sizes)) | (i < 0) | (i > j)
            bad |= j >= sizes[np.clip(blk.astype(int), 0, len(self.psd_sizes))]
            if bad.any():
                logger.error(f"Out-of-range {name} entry {np.flatnonzero(bad)[0]}")
                raise ValueError(f"{name.capitalize()} entries must be upper-triangle indices of existing blocks")
        rows = self.rhs.size
        if self.eq_psd.size and (self.eq_psd[:, 0].min() < 0 or self.eq_psd[:, 0].max() >= rows):
            logger.error("Equality entry with row outside the rhs range")
            raise ValueError("Equality rows must be in [0, rows)")
        if self.eq_lp.size:
            if self.eq_lp[:, 0].min() < 0 or self.eq_lp[:, 0].max() >= rows:
                logger.error("Orthant entry with row outside the rhs range")
                raise ValueError("Equality rows must be in [0, rows)")
            if self.eq_lp[:, 1].min() < 0 or self.eq_lp[:, 1].max() >= self.nonneg_count:
                logger.error("Orthant entry with index outside the orthant")
                raise ValueError("Orthant indices must be in [0, nonneg)")

    @property
    def num_rows(self):
        return self.rhs.size

    @property
    def is_lp(self):
        """True when every PSD block is 1x1, i.e. the program is a linear program."""
        return all(p == 1 for p in self.psd_sizes)

    def cost_matrices(self):
        """Dense cost matrices per PSD block."""
        return [_densify(self.cost_psd[self.cost_psd[:, 0] == b][:, 1:], p) for b, p in enumerate(self.psd_sizes)]

    def evaluate(self, blocks, x=None):
        """Objective value and equality residual A(X) + a x - rhs at a primal point."""
        x = np.zeros(self.nonneg_count) if x is None else np.asarray(x, dtype=float)
        if len(blocks) != len(self.psd_sizes):
            logger.error(f"Got {len(blocks)} blocks for {len(self.psd_sizes)} PSD variables")
            raise ValueError("Block count does not match the program")
        value = float(self.cost_lp @ x)
        lhs = np.zeros(self.num_rows)
        if self.cost_psd.size:
            value += float(np.sum(self.cost_psd[:, 3] * _pick(blocks, self.cost_psd[:, :3])))
        if self.eq_psd.size:
            np.add.at(lhs, self.eq_psd[:, 0].astype(int), self.eq_psd[:, 4] * _pick(blocks, self.eq_psd[:, 1:4]))
        if self.eq_lp.size:
            np.add.at(lhs, self.eq_lp[:, 0].astype(int), self.eq_lp[:, 2] * x[self.eq_lp[:, 1].astype(int)])
        return value, lhs - self.rhs

    def select_rows(self, rows):
        """Program restricted to the given equality rows, renumbered in the given order."""
        rows = np.asarray(rows, dtype=int)
        remap = np.full(self.num_rows, -1)
        remap[rows] = np.arange(rows.size)
        psd = self.eq_psd[remap[self.eq_psd[:, 0].astype(int)] >= 0] if self.eq_psd.size else self.eq_psd
        lp = self.eq_lp[remap[self.eq_lp[:, 0].astype(int)] >= 0] if self.eq_lp.size else self.eq_lp
        psd = psd.copy()
        lp = lp.copy()
        if psd.size:
            psd[:, 0] = remap[psd[:, 0].astype(int)]
        if lp.size:
            lp[:, 0] = remap[lp[:, 0].astype(int)]
        return BlockSDP(self.psd_sizes, self.nonneg_count, self.rhs[rows], self.cost_psd, self.cost_lp, psd, lp)

    def __repr__(self):
        return (f"BlockSDP(psd={len(self.psd_sizes)} blocks, max size {max(self.psd_sizes, default=0)}, "
                f"nonneg={self.nonneg_count}, rows={self.num_rows})")


def _pick(blocks, index):
    """Weighted entries X_b[i, j] (doubled off the diagonal) for rows of (block, i, j)."""
    out = np.empty(index.shape[0])
    for row, (b, i, j) in enumerate(index.astype(int)):
        value = blocks[b][i, j]
        out[row] = value if i == j else 2.0 * value
    return out


def _densify(entries, size):
    M = np.zeros((size, size))
    for i, j, v in entries:
        i, j = int(i), int(j)
        M[i, j] += v
        if i != j:
            M[j, i] += v
    return M


class BlockSDPBuilder:
    """Incremental construction of a BlockSDP."""

    def __init__(self):
        self.psd_sizes = []
        self.nonneg_count = 0
        self.rhs = []
        self.cost_psd = []
        self.cost_lp = {}
        self.eq_psd = []
        self.eq_lp = []

    @classmethod
    def from_sdp(cls, sdp):
        builder = cls()
        builder.psd_sizes = list(sdp.psd_sizes)
        builder.nonneg_count = sdp.nonneg_count
        builder.rhs = sdp.rhs.tolist()
        builder.cost_psd = sdp.cost_psd.tolist()
        builder.cost_lp = {i: v for i, v in enumerate(sdp.cost_lp.tolist()) if v != 0}
        builder.eq_psd = sdp.eq_psd.tolist()
        builder.eq_lp = sdp.eq_lp.tolist()
        return builder

    def add_psd_block(self, size):
        self.psd_sizes.append(int(size))
        return len(self.psd_sizes) - 1

    def add_nonneg(self, count=1):
        first = self.nonneg_count
        self.nonneg_count += int(count)
        return first

    def add_row(self, rhs=0.0):
        self.rhs.append(float(rhs))
        return len(self.rhs) - 1

    def add_entry(self, row, block, i, j, coef):
        """Add coef * X_block[i, j] to the left-hand side of `row`."""
        if coef == 0:
            return
        i, j = min(i, j), max(i, j)
        self.eq_psd.append((row, block, i, j, coef if i == j else coef / 2.0))

    def add_matrix(self, row, block, matrix):
        """Add <matrix, X_block> to the left-hand side of `row`."""
        matrix = np.asarray(matrix, dtype=float)
        for i, j in zip(*np.triu_indices(matrix.shape[0])):
            if matrix[i, j] != 0:
                self.eq_psd.append((row, block, int(i), int(j), float(matrix[i, j])))

    def add_nonneg_entry(self, row, index, coef):
        if coef != 0:
            self.eq_lp.append((row, index, coef))

    def add_cost_entry(self, block, i, j, coef):
        if coef == 0:
            return
        i, j = min(i, j), max(i, j)
        self.cost_psd.append((block, i, j, coef if i == j else coef / 2.0))

    def add_cost_matrix(self, block, matrix):
        matrix = np.asarray(matrix, dtype=float)
        for i, j in zip(*np.triu_indices(matrix.shape[0])):
            if matrix[i, j] != 0:
                self.cost_psd.append((block, int(i), int(j), float(matrix[i, j])))

    def add_cost_nonneg(self, index, coef):
        self.cost_lp[index] = self.cost_lp.get(index, 0.0) + coef

    def build(self):
        cost_lp = np.zeros(self.nonneg_count)
        for index, coef in self.cost_lp.items():
            cost_lp[index] = coef
        sdp = BlockSDP(self.psd_sizes, self.nonneg_count, self.rhs, self.cost_psd, cost_lp, self.eq_psd, self.eq_lp)
        logger.debug(f"Built {sdp}")
        return sdp


def dumps(sdp):
    lines = [f"{DUMP_MAGIC} {DUMP_VERSION}",
             'psd ' + ' '.join([str(len(sdp.psd_sizes))] + [str(p) for p in sdp.psd_sizes]),
             f"nonneg {sdp.nonneg_count}",
             f"rows {sdp.num_rows}"]
    lines += [f"rhs {r} {v!r}" for r, v in enumerate(sdp.rhs.tolist())]
    lines += [f"c {int(b)} {int(i)} {int(j)} {v!r}" for b, i, j, v in sdp.cost_psd.tolist()]
    lines += [f"cx {idx} {v!r}" for idx, v in enumerate(sdp.cost_lp.tolist())]
    lines += [f"a {int(r)} {int(b)} {int(i)} {int(j)} {v!r}" for r, b, i, j, v in sdp.eq_psd.tolist()]
    lines += [f"ax {int(r)} {int(idx)} {v!r}" for r, idx, v in sdp.eq_lp.tolist()]
    return '\n'.join(lines) + '\n'


def loads(text):
    """Parse a dump produced by `dumps`."""
    sizes = None
    nonneg = rows = None
    rhs, cost_psd, cost_lp, eq_psd, eq_lp = {}, [], {}, [], []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        tag = fields[0]
        try:
            if tag == DUMP_MAGIC:
                if int(fields[1]) != DUMP_VERSION:
                    raise ValueError(f"unsupported version {fields[1]}")
            elif tag == 'psd':
                sizes = [int(f) for f in fields[2:]]
                if len(sizes) != int(fields[1]):
                    raise ValueError("block count does not match the listed sizes")
            elif tag == 'nonneg':
                nonneg = int(fields[1])
            elif tag == 'rows':
                rows = int(fields[1])
            elif tag == 'rhs':
                rhs[int(fields[1])] = float(fields[2])
            elif tag == 'c':
                cost_psd.append((int(fields[1]), int(fields[2]), int(fields[3]), float(fields[4])))
            elif tag == 'cx':
                cost_lp[int(fields[1])] = float(fields[2])
            elif tag == 'a':
                eq_psd.append((int(fields[1]), int(fields[2]), int(fields[3]), int(fields[4]), float(fields[5])))
            elif tag == 'ax':
                eq_lp.append((int(fields[1]), int(fields[2]), float(fields[3])))
            else:
                raise ValueError(f"unknown record '{tag}'")
        except (IndexError, ValueError) as e:
            logger.error(f"Malformed dump line {number}: {raw!r} ({e})")
            raise ValueError(f"Malformed BlockSDP dump at line {number}: {e}")

    if sizes is None or nonneg is None or rows is None:
        logger.error("Dump is missing the psd, nonneg or rows header")
        raise ValueError("BlockSDP dump needs psd, nonneg and rows headers")
    if any(not 0 <= r < rows for r in rhs) or any(not 0 <= idx < nonneg for idx in cost_lp):
        logger.error("Dump has rhs or orthant cost records outside the declared sizes")
        raise ValueError("BlockSDP dump record index out of range")
    rhs_vector = np.zeros(rows)
    for r, v in rhs.items():
        rhs_vector[r] = v
    cost_vector = np.zeros(nonneg)
    for idx, v in cost_lp.items():
        cost_vector[idx] = v
    return BlockSDP(sizes, nonneg, rhs_vector, cost_psd, cost_vector, eq_psd, eq_lp)


def dump(sdp, path):
    with open(path, 'w') as f:
        f.write(dumps(sdp))
    logger.info(f"Wrote {sdp} to {path}")


def load(path):
    with open(path) as f:
        return loads(f.read())
