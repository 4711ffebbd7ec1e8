"""Symmetric eigenvalue routines for tiny (dim <= 4) matrices.

Everything here is pure Python on purpose: the LMI feasibility margins that
drive the rest of the toolkit come from these eigenvalues, and a dependency
free cyclic Jacobi is deterministic across platforms and fast enough at this
size.  Definiteness is decided from the spectrum, not a Cholesky attempt, so
the margin argument is directly a spectral quantity.
"""

import math

_MAX_SWEEPS = 100
_OFF_TOL = 1e-13  # off-diagonal Frobenius target, relative to matrix scale


class SymMatrix:
    """Symmetric matrix of dimension 1..4, upper triangle stored row-major.

    Only the upper triangle is kept (dim*(dim+1)//2 values), so symmetry
    holds by construction.  Instances are value objects; entries are a tuple.
    """

    __slots__ = ("dim", "entries")

    def __init__(self, dim, entries):
        if not isinstance(dim, int) or isinstance(dim, bool) or not (1 <= dim <= 4):
            raise ValueError("dim must be an integer in 1..4, got %r" % (dim,))
        vals = tuple(float(v) for v in entries)
        want = dim * (dim + 1) // 2
        if len(vals) != want:
            raise ValueError("dim %d stores %d entries, got %d" % (dim, want, len(vals)))
        for v in vals:
            if not math.isfinite(v):
                raise ValueError("non-finite matrix entry %r" % (v,))
        self.dim = dim
        self.entries = vals

    @classmethod
    def from_rows(cls, rows):
        """Build from a full square row-of-rows; the lower triangle is ignored."""
        dim = len(rows)
        ent = []
        for i in range(dim):
            if len(rows[i]) != dim:
                raise ValueError("rows must form a square matrix")
            for j in range(i, dim):
                ent.append(rows[i][j])
        return cls(dim, ent)

    def _idx(self, i, j):
        if i > j:
            i, j = j, i
        return i * self.dim - (i * (i - 1)) // 2 + (j - i)

    def __getitem__(self, ij):
        i, j = ij
        if not (0 <= i < self.dim and 0 <= j < self.dim):
            raise IndexError("index out of range for dim %d" % self.dim)
        return self.entries[self._idx(i, j)]

    def to_rows(self):
        return [[self[i, j] for j in range(self.dim)] for i in range(self.dim)]

    def frobenius(self):
        s = 0.0
        for i in range(self.dim):
            for j in range(self.dim):
                s += self[i, j] ** 2
        return math.sqrt(s)

    def __repr__(self):
        return "SymMatrix(%d, %r)" % (self.dim, list(self.entries))

    def __eq__(self, other):
        return (
            isinstance(other, SymMatrix)
            and self.dim == other.dim
            and self.entries == other.entries
        )

    def __hash__(self):
        return hash((self.dim, self.entries))


def _jacobi(m):
    """Cyclic Jacobi sweeps; returns (diagonal values, accumulated rotation V).

    V's columns are the eigenvectors: A = V diag V^T up to the off-diagonal
    tolerance.  dim <= 4 converges in a handful of sweeps.
    """
    n = m.dim
    a = m.to_rows()
    v = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    scale = max(1.0, m.frobenius())
    for _ in range(_MAX_SWEEPS):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += a[p][q] * a[p][q]
        if math.sqrt(2.0 * off) <= _OFF_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p][q]
                if apq == 0.0:
                    continue
                theta = (a[q][q] - a[p][p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                app, aqq = a[p][p], a[q][q]
                a[p][p] = app - t * apq
                a[q][q] = aqq + t * apq
                a[p][q] = a[q][p] = 0.0
                for r in range(n):
                    if r == p or r == q:
                        continue
                    arp, arq = a[r][p], a[r][q]
                    a[r][p] = a[p][r] = c * arp - s * arq
                    a[r][q] = a[q][r] = s * arp + c * arq
                for r in range(n):
                    vrp, vrq = v[r][p], v[r][q]
                    v[r][p] = c * vrp - s * vrq
                    v[r][q] = s * vrp + c * vrq
    vals = [a[i][i] for i in range(n)]
    order = sorted(range(n), key=lambda i: vals[i])
    vals_sorted = [vals[i] for i in order]
    vecs = [[v[r][i] for i in order] for r in range(n)]
    return vals_sorted, vecs


def eigenvalues(m):
    """All eigenvalues of m, ascending."""
    return _jacobi(m)[0]


def eigh(m):
    """Eigen-decomposition (values ascending, eigenvector matrix by columns)."""
    return _jacobi(m)


def is_positive_definite(m, margin=0.0):
    """True iff lambda_min(m) > margin.  margin must be >= 0."""
    if not (margin >= 0.0) or not math.isfinite(margin):
        raise ValueError("margin must be a finite scalar >= 0")
    return eigenvalues(m)[0] > margin


def is_negative_semidefinite(m, slack=0.0):
    """True iff lambda_max(m) <= slack.  slack must be >= 0."""
    if not (slack >= 0.0) or not math.isfinite(slack):
        raise ValueError("slack must be a finite scalar >= 0")
    return eigenvalues(m)[-1] <= slack


def is_negative_definite(m, margin=0.0):
    """True iff lambda_max(m) < -margin (strict form used for Phi < 0)."""
    if not (margin >= 0.0) or not math.isfinite(margin):
        raise ValueError("margin must be a finite scalar >= 0")
    return eigenvalues(m)[-1] < -margin
