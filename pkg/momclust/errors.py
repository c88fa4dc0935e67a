"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

"""
Exceptions raised by momclust on top of plain ValueError.
"""


class SizeGuardError(ValueError):
    """Refusal to enumerate or assemble something larger than a configured cap."""

    def __init__(self, message, count, limit):
        super().__init__(message)
        self.count = count
        self.limit = limit


class SolverStatusError(ValueError):
    """A relaxation result was requested from a solve that did not reach optimality."""

    def __init__(self, message, status):
        super().__init__(message)
        self.status = status
