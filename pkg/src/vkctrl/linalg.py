"""Sparse direct factorization used by every solver.

Biharmonic stiffness matrices are severely ill-conditioned (kappa grows
like h^-4), so a direct LU factorization is used throughout; problem
sizes stay below ~130k unknowns.  The factorization object is reusable
for many right-hand sides and can solve with the transposed matrix,
which is how the adjoint systems share the state factorization.
"""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class FactorizationError(RuntimeError):
    pass


class BandedCholesky:
    """Cholesky factorization of an SPD matrix with banded structure.

    The lexicographic node numbering keeps the scalar plate matrices
    banded with bandwidth O(sqrt(n)), where LAPACK's banded Cholesky is
    far cheaper in time and memory than general sparse LU.
    """

    def __init__(self, a):
        a = sp.csr_matrix(a)
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix must be square, got shape {a.shape}")
        self.n = a.shape[0]
        coo = a.tocoo()
        keep = coo.row <= coo.col
        r, c, d = coo.row[keep], coo.col[keep], coo.data[keep]
        bw = int(np.max(c - r)) if r.size else 0
        band = np.zeros((bw + 1, self.n))
        band[bw + r - c, c] = d
        try:
            self._cb = sla.cholesky_banded(band, lower=False)
        except sla.LinAlgError as err:
            raise FactorizationError(f"banded Cholesky failed: {err}") from err
        self.bandwidth = bw

    def solve(self, b, trans="N"):
        # symmetric: the transposed system is the same system
        return sla.cho_solve_banded((self._cb, False), np.asarray(b, dtype=float))


class Factorization:
    """Handle to an LU-factorized sparse matrix."""

    def __init__(self, lu, n):
        self._lu = lu
        self.n = n

    def solve(self, b, trans="N"):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"right-hand side length {b.shape[0]} != {self.n}")
        return self._lu.solve(b, trans=trans)


def factorize(a):
    """LU-factorize a square sparse matrix; reusable for many solves."""
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    try:
        lu = spla.splu(sp.csc_matrix(a))
    except RuntimeError as err:  # SuperLU reports the failing pivot stage
        raise FactorizationError(f"sparse factorization failed: {err}") from err
    return Factorization(lu, a.shape[0])


def solve(fact, b, trans="N"):
    return fact.solve(b, trans=trans)
