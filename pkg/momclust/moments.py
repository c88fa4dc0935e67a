"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

"""
Moment machinery for polynomial optimization: monomial bases, sparse polynomials,
pseudo-moment vectors, moment and localizing matrices, and the truncated moment
relaxation of  min f(x)  s.t.  h_j(x) = 0, g_i(x) >= 0  written as a BlockSDP.
"""

import math
from dataclasses import dataclass

import numpy as np

from momclust.blocksdp import BlockSDPBuilder
from momclust.logger import logger
from momclust.solver import InteriorPointSolver


def _exponents(d, degree):
    """Exponents of total degree `degree` in lexicographically descending order."""
    if d == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in _exponents(d - 1, degree - first):
            yield (first,) + rest


class MonomialBasis:
    """Monomials x^alpha with |alpha| <= t in graded-lex order, zero exponent first."""

    def __init__(self, d, t):
        if d < 1 or t < 0:
            logger.error(f"Invalid monomial basis d={d}, t={t}")
            raise ValueError("Monomial basis needs d >= 1 and t >= 0")
        self.d = int(d)
        self.t = int(t)
        self.exponents = tuple(alpha for degree in range(t + 1) for alpha in _exponents(d, degree))
        self.index = {alpha: pos for pos, alpha in enumerate(self.exponents)}

    def __len__(self):
        return len(self.exponents)

    def __iter__(self):
        return iter(self.exponents)

    def vector(self, x):
        """v(x) = (x^alpha) over the basis."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.d:
            logger.error(f"Point of dimension {x.size} for a basis in {self.d} variables")
            raise ValueError("Point dimension does not match the basis")
        return np.array([np.prod(x ** np.asarray(alpha)) for alpha in self.exponents])


def _add(alpha, beta):
    return tuple(a + b for a, b in zip(alpha, beta))


class Poly:
    """Sparse real polynomial in d variables, stored as {exponent tuple: coefficient}."""

    def __init__(self, coefficients, d):
        self.d = int(d)
        self.coefficients = {}
        for alpha, value in dict(coefficients).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.d or min(alpha) < 0:
                logger.error(f"Exponent {alpha} does not fit {self.d} variables")
                raise ValueError("Exponents must be nonnegative tuples of length d")
            value = float(value)
            if value != 0:
                self.coefficients[alpha] = self.coefficients.get(alpha, 0.0) + value
        self.coefficients = {alpha: v for alpha, v in self.coefficients.items() if v != 0}

    @classmethod
    def constant(cls, value, d):
        return cls({(0,) * d: value}, d)

    @classmethod
    def variable(cls, i, d):
        alpha = [0] * d
        alpha[i] = 1
        return cls({tuple(alpha): 1.0}, d)

    @property
    def degree(self):
        return max((sum(alpha) for alpha in self.coefficients), default=0)

    @property
    def half_degree(self):
        """ceil(deg / 2)."""
        return math.ceil(self.degree / 2)

    def _coerce(self, other):
        if isinstance(other, Poly):
            if other.d != self.d:
                logger.error(f"Mixing polynomials in {self.d} and {other.d} variables")
                raise ValueError("Polynomials must share the variable count")
            return other
        return Poly.constant(other, self.d)

    def __add__(self, other):
        other = self._coerce(other)
        merged = dict(self.coefficients)
        for alpha, value in other.coefficients.items():
            merged[alpha] = merged.get(alpha, 0.0) + value
        return Poly(merged, self.d)

    __radd__ = __add__

    def __neg__(self):
        return Poly({alpha: -v for alpha, v in self.coefficients.items()}, self.d)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        product = {}
        for alpha, u in self.coefficients.items():
            for beta, v in other.coefficients.items():
                gamma = _add(alpha, beta)
                product[gamma] = product.get(gamma, 0.0) + u * v
        return Poly(product, self.d)

    __rmul__ = __mul__

    def __pow__(self, power):
        result = Poly.constant(1.0, self.d)
        for _ in range(int(power)):
            result = result * self
        return result

    def __call__(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        return float(sum(v * np.prod(x ** np.asarray(alpha)) for alpha, v in self.coefficients.items()))

    def __repr__(self):
        return f"Poly({self.coefficients}, d={self.d})"


class MomentVector:
    """Pseudo-moments y_alpha for |alpha| <= 2t."""

    def __init__(self, values, d, t):
        self.basis = MonomialBasis(d, 2 * t)
        values = np.array(values, dtype=float).reshape(-1)
        if values.size != len(self.basis):
            logger.error(f"Moment vector of length {values.size}, expected {len(self.basis)}")
            raise ValueError("Moment vector length must be C(d + 2t, d)")
        self.values = values
        self.d = int(d)
        self.t = int(t)

    @classmethod
    def dirac(cls, x, t):
        x = np.asarray(x, dtype=float).reshape(-1)
        return cls(MonomialBasis(x.size, 2 * t).vector(x), x.size, t)

    @classmethod
    def mixture(cls, vectors, weights):
        vectors = list(vectors)
        values = sum(w * v.values for v, w in zip(vectors, weights))
        return cls(values, vectors[0].d, vectors[0].t)

    @property
    def y0(self):
        return float(self.values[0])

    def __getitem__(self, alpha):
        return float(self.values[self.basis.index[tuple(alpha)]])


def riesz(y, p):
    """L_y(p) = sum_alpha p_alpha y_alpha."""
    if p.d != y.d or p.degree > 2 * y.t:
        logger.error(f"Polynomial of degree {p.degree} against moments of order {2 * y.t}")
        raise ValueError("Polynomial degree exceeds the moment order")
    return float(sum(v * y[alpha] for alpha, v in p.coefficients.items()))


def localizing_matrix(y, f, t=None):
    """(M_t(f, y))_{alpha, beta} = L_y(x^alpha x^beta f) over the basis of degree t - ceil(deg f / 2)."""
    t = y.t if t is None else int(t)
    if f.d != y.d:
        logger.error("Localizing polynomial and moments differ in variable count")
        raise ValueError("Variable counts differ")
    if t < f.half_degree or t > y.t:
        logger.error(f"Order t={t} outside [{f.half_degree}, {y.t}]")
        raise ValueError("Localizing order must satisfy ceil(deg f / 2) <= t <= moment order")
    basis = MonomialBasis(y.d, t - f.half_degree)
    size = len(basis)
    M = np.zeros((size, size))
    for a, alpha in enumerate(basis):
        for b in range(a, size):
            base = _add(alpha, basis.exponents[b])
            M[a, b] = M[b, a] = sum(v * y[_add(base, gamma)] for gamma, v in f.coefficients.items())
    return M


def moment_matrix(y, t=None):
    """(M_t(y))_{alpha, beta} = y_{alpha + beta}."""
    return localizing_matrix(y, Poly.constant(1.0, y.d), t)


@dataclass(frozen=True, eq=False)
class LasserreProgram:
    """A truncated moment relaxation and the index data needed to read moments back.

    Block 0 is the moment matrix; `representative` maps every exponent of degree <= 2t
    to the entry of block 0 that carries its moment.
    """

    sdp: object
    t: int
    d: int
    representative: dict
    skipped: tuple = ()

    def moments(self, solution):
        X0 = solution.X[0]
        basis = MonomialBasis(self.d, 2 * self.t)
        return MomentVector([X0[self.representative[alpha]] for alpha in basis], self.d, self.t)

    def solve(self, config=None):
        """Relaxation value rho_t (dual objective) and the conic solution."""
        solution = InteriorPointSolver(config).solve(self.sdp)
        return solution.dual_objective, solution


def _tie_localizing(builder, block, basis, f, representative):
    """Rows X_block[a, b] = sum_gamma f_gamma y_{alpha_a + alpha_b + gamma}."""
    size = len(basis)
    for a in range(size):
        for b in range(a, size):
            base = _add(basis.exponents[a], basis.exponents[b])
            coefs = {}
            for gamma, value in f.coefficients.items():
                entry = representative[_add(base, gamma)]
                coefs[entry] = coefs.get(entry, 0.0) + value
            row = builder.add_row(0.0)
            builder.add_entry(row, block, a, b, 1.0)
            for (i, j), value in coefs.items():
                builder.add_entry(row, 0, i, j, -value)


def assemble_lmm(objective, eqs=(), ineqs=(), t=1):
    """Moment relaxation of order t: M_t(y) PSD, M_t(g, y) PSD, M_t(+-h, y) PSD, y_0 = 1.

    Constraints whose half degree exceeds t are skipped with a warning.
    """
    d = objective.d
    if t < objective.half_degree:
        logger.error(f"Order t={t} below half degree {objective.half_degree} of the objective")
        raise ValueError("Relaxation order too small for the objective")
    for poly in list(eqs) + list(ineqs):
        if poly.d != d:
            logger.error("Constraint with a different variable count")
            raise ValueError("All polynomials must share the variable count")
    logger.info(f"Assembling moment relaxation of order {t} in {d} variables")

    basis = MonomialBasis(d, t)
    builder = BlockSDPBuilder()
    builder.add_psd_block(len(basis))
    representative = {}
    for a in range(len(basis)):
        for b in range(a, len(basis)):
            gamma = _add(basis.exponents[a], basis.exponents[b])
            if gamma not in representative:
                representative[gamma] = (a, b)
                continue
            # Hankel structure: equal exponent sums carry equal moments.
            row = builder.add_row(0.0)
            builder.add_entry(row, 0, a, b, 1.0)
            builder.add_entry(row, 0, *representative[gamma], -1.0)
    row = builder.add_row(1.0)
    builder.add_entry(row, 0, 0, 0, 1.0)

    skipped = []
    constraints = [(g, 'inequality') for g in ineqs] + [(s * h, 'equality') for h in eqs for s in (1.0, -1.0)]
    for poly, kind in constraints:
        if poly.half_degree > t:
            logger.warning(f"Skipping {kind} of degree {poly.degree} at order {t}")
            skipped.append(repr(poly))
            continue
        local = MonomialBasis(d, t - poly.half_degree)
        block = builder.add_psd_block(len(local))
        _tie_localizing(builder, block, local, poly, representative)

    for gamma, value in objective.coefficients.items():
        builder.add_cost_entry(0, *representative[gamma], value)

    sdp = builder.build()
    logger.info(f"Moment relaxation has {len(sdp.psd_sizes)} blocks and {sdp.num_rows} rows")
    return LasserreProgram(sdp, int(t), d, representative, tuple(skipped))
