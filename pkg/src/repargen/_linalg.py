"""Exact rational linear algebra: dense rank and sparse nullspace.

Uses gmpy2.mpq when available (it is in the supported environment); falls
back to fractions.Fraction.
"""

from __future__ import annotations

from fractions import Fraction

try:
    from gmpy2 import mpq
except ImportError:  # pragma: no cover
    mpq = Fraction


def to_mpq(x) -> "mpq":
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


def rank(rows: list[list], ncols: int, skip_col: int | None = None) -> int:
    """Exact rank by Gaussian elimination; ``skip_col`` deletes one column."""
    cols = [c for c in range(ncols) if c != skip_col]
    mat = [[to_mpq(r[c]) for c in cols] for r in rows if any(r[c] for c in cols)]
    m = len(mat)
    n = len(cols)
    r = 0
    for c in range(n):
        piv = None
        for i in range(r, m):
            if mat[i][c]:
                piv = i
                break
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        prow = mat[r]
        pval = prow[c]
        for i in range(r + 1, m):
            f = mat[i][c]
            if f:
                f = f / pval
                row = mat[i]
                for j in range(c, n):
                    row[j] -= f * prow[j]
        r += 1
        if r == m:
            break
    return r


def rref_sparse(rows: list[dict[int, Fraction]], ncols: int):
    """Reduced row echelon form of a sparse rational matrix.

    Returns (pivot columns, reduced rows) where each reduced row is a sparse
    dict with a unit pivot entry.
    """
    work = [dict(r) for r in rows if r]
    pivots: list[int] = []
    reduced: list[dict[int, Fraction]] = []
    for col in range(ncols):
        piv_row = None
        for i, r in enumerate(work):
            if r.get(col):
                piv_row = i
                break
        if piv_row is None:
            continue
        row = work.pop(piv_row)
        inv = 1 / row[col]
        row = {c: v * inv for c, v in row.items() if v}
        # eliminate from remaining rows
        nxt = []
        for r in work:
            f = r.get(col)
            if f:
                out = dict(r)
                for c, v in row.items():
                    nv = out.get(c, Fraction(0)) - f * v
                    if nv:
                        out[c] = nv
                    else:
                        out.pop(c, None)
                if out:
                    nxt.append(out)
            else:
                nxt.append(r)
        work = nxt
        # and from already-reduced rows (full reduction)
        for r in reduced:
            f = r.get(col)
            if f:
                for c, v in row.items():
                    nv = r.get(c, Fraction(0)) - f * v
                    if nv:
                        r[c] = nv
                    else:
                        r.pop(c, None)
        pivots.append(col)
        reduced.append(row)
        if not work:
            break
    return pivots, reduced


def nullspace_sparse(rows: list[dict[int, Fraction]], ncols: int) -> list[dict[int, Fraction]]:
    """Basis of the exact nullspace, one vector per free column, in column
    order (each has a unit entry at its free column)."""
    pivots, reduced = rref_sparse(rows, ncols)
    pivot_set = set(pivots)
    by_pivot = dict(zip(pivots, reduced))
    basis = []
    for free in range(ncols):
        if free in pivot_set:
            continue
        vec = {free: Fraction(1)}
        for p in pivots:
            coeff = by_pivot[p].get(free)
            if coeff:
                vec[p] = -coeff
        basis.append(vec)
    return basis
