"""Small exact linear algebra over Fractions (matrices as tuples of rows)."""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

FracMatrix = tuple[tuple[Fraction, ...], ...]


def as_matrix(rows) -> FracMatrix:
    return tuple(tuple(Fraction(x) for x in r) for r in rows)


def identity(n: int) -> FracMatrix:
    return tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))


def transpose(A) -> FracMatrix:
    return tuple(zip(*A))


def matmul(A, B) -> FracMatrix:
    Bt = list(zip(*B))
    return tuple(tuple(sum((a * b for a, b in zip(row, col)), Fraction(0)) for col in Bt) for row in A)


def matvec(A, v: Sequence) -> tuple[Fraction, ...]:
    return tuple(sum((a * x for a, x in zip(row, v)), Fraction(0)) for row in A)


def matpow(A, n: int) -> FracMatrix:
    R = identity(len(A))
    B = A
    while n:
        if n & 1:
            R = matmul(R, B)
        n >>= 1
        if n:
            B = matmul(B, B)
    return R


def inverse(A) -> FracMatrix:
    n = len(A)
    M = [list(map(Fraction, row)) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        M[col] = [x / p for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    return tuple(tuple(row[n:]) for row in M)


def nullspace(A) -> list[tuple[Fraction, ...]]:
    """Basis of the right kernel by reduced row echelon form."""
    rows = [list(map(Fraction, r)) for r in A]
    m = len(rows)
    n = len(rows[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, m) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        p = rows[r][c]
        rows[r] = [x / p for x in rows[r]]
        for i in range(m):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == m:
            break
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * n
        v[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -rows[i][fc]
        basis.append(tuple(v))
    return basis


def charpoly(A) -> list[Fraction]:
    """Coefficients of det(tI - A), highest degree first (Faddeev-LeVerrier)."""
    n = len(A)
    coeffs = [Fraction(1)]
    M = [[Fraction(0)] * n for _ in range(n)]
    A = [list(map(Fraction, r)) for r in A]
    c = Fraction(1)
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{k-1} I
        AM = [[sum((A[i][l] * M[l][j] for l in range(n)), Fraction(0)) for j in range(n)] for i in range(n)]
        M = [[AM[i][j] + (c if i == j else 0) for j in range(n)] for i in range(n)]
        AM = [[sum((A[i][l] * M[l][j] for l in range(n)), Fraction(0)) for j in range(n)] for i in range(n)]
        c = -sum((AM[i][i] for i in range(n)), Fraction(0)) / k
        coeffs.append(c)
    return coeffs
