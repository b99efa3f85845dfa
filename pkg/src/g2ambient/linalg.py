"""Small dense linear algebra over a :class:`~g2ambient.field.Field`.

Exact mode pivots on any nonzero entry; float mode uses partial pivoting and
treats entries below the field tolerance as zero.
"""
from __future__ import annotations

from .field import Field


class SingularMatrixError(ValueError):
    pass


def _rows(m, field):
    return [[field(v) for v in row] for row in m]


def rref(m, field: Field, tol=None):
    """Reduced row echelon form; returns (rows, pivot_columns)."""
    a = _rows(m, field)
    if not a:
        return a, []
    tol = field.tolerance() if tol is None else tol
    nr, nc = len(a), len(a[0])
    pivots = []
    r = 0
    with field.context():
        for c in range(nc):
            if r == nr:
                break
            if field.exact:
                piv = next((i for i in range(r, nr) if a[i][c] != 0), None)
            else:
                best = max(range(r, nr), key=lambda i: abs(a[i][c]))
                piv = best if abs(a[best][c]) > tol else None
            if piv is None:
                continue
            a[r], a[piv] = a[piv], a[r]
            inv = field.one / a[r][c]
            a[r] = [v * inv for v in a[r]]
            for i in range(nr):
                if i != r and a[i][c] != 0:
                    f = a[i][c]
                    a[i] = [vi - f * vr for vi, vr in zip(a[i], a[r])]
            pivots.append(c)
            r += 1
    return a[:r], pivots


def rank(m, field: Field, tol=None) -> int:
    return len(rref(m, field, tol)[1])


def nullspace(m, field: Field, ncols: int, tol=None):
    """Basis of {v : m v = 0} as a list of vectors."""
    rows, pivots = rref(m, field, tol) if m else ([], [])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    with field.context():
        for f in free:
            v = [field.zero] * ncols
            v[f] = field.one
            for row, p in zip(rows, pivots):
                v[p] = -row[f]
            basis.append(v)
    return basis


def inverse(m, field: Field):
    n = len(m)
    aug = [list(row) + [1 if i == j else 0 for j in range(n)] for i, row in enumerate(m)]
    rows, pivots = rref(aug, field)
    if pivots[:n] != list(range(n)):
        raise SingularMatrixError("matrix is singular")
    return [row[n:] for row in rows]


def solve(m, rhs, field: Field):
    """Solve m x = rhs for square nonsingular m."""
    n = len(m)
    aug = [list(row) + [b] for row, b in zip(m, rhs)]
    rows, pivots = rref(aug, field)
    if pivots != list(range(n)):
        raise SingularMatrixError("matrix is singular")
    return [row[n] for row in rows]


def signature(m, field: Field, tol=None):
    """(positive, negative) inertia of a symmetric matrix by symmetric pivoting.

    Diagonal pivots are used when available; otherwise a 2x2 block
    [[0, b], [b, 0]] is eliminated, which contributes one sign of each kind.
    """
    a = _rows(m, field)
    tol = field.tolerance() if tol is None else tol
    pos = neg = 0

    def nz(v):
        return v != 0 if field.exact else abs(v) > tol

    with field.context():
        while a:
            n = len(a)
            diag = [i for i in range(n) if nz(a[i][i])]
            if diag:
                k = max(diag, key=lambda i: abs(a[i][i]))
                d = a[k][k]
                if d > 0:
                    pos += 1
                else:
                    neg += 1
                rest = [i for i in range(n) if i != k]
                a = [[a[i][j] - a[i][k] * a[k][j] / d for j in rest] for i in rest]
                continue
            pair = next(((i, j) for i in range(n) for j in range(i + 1, n) if nz(a[i][j])), None)
            if pair is None:
                if n:
                    raise SingularMatrixError("degenerate symmetric matrix")
                break
            i, j = pair
            # replace row/col i by i + j to create a nonzero diagonal entry
            for c in range(n):
                a[i][c] = a[i][c] + a[j][c]
            for r in range(n):
                a[r][i] = a[r][i] + a[r][j]
    return pos, neg
