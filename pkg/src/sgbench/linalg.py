"""Exact matrix arithmetic for 2x2 and 3x3 integer and residue matrices.

Everything runs on plain Python bigints: no floats, no fixed-width types.
Entries in this project routinely reach 10^40, which overflows every
hardware integer, so exactness is the point.  Smith normal form and the
mod-p nullspace accept rectangular inputs (the stacked form systems are
12x6) and therefore work on plain nested sequences rather than the
square wrappers.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd


def _square_rows(rows):
    out = tuple(tuple(int(e) for e in row) for row in rows)
    n = len(out)
    if n not in (2, 3):
        raise ValueError(f"unsupported dimension {n}, expected 2 or 3")
    for row in out:
        if len(row) != n:
            raise ValueError("matrix is not square")
    return out


@dataclass(frozen=True)
class BigMatrix:
    """Immutable square integer matrix of dimension 2 or 3."""

    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "rows", _square_rows(self.rows))

    @staticmethod
    def identity(dim: int) -> "BigMatrix":
        return BigMatrix(tuple(tuple(int(i == j) for j in range(dim)) for i in range(dim)))

    @staticmethod
    def elementary(dim: int, i: int, j: int, c: int) -> "BigMatrix":
        """I + c*E_ij with 0-based indices, i != j."""
        if i == j:
            raise ValueError("elementary transvection needs i != j")
        rows = [[int(a == b) for b in range(dim)] for a in range(dim)]
        rows[i][j] = int(c)
        return BigMatrix(tuple(tuple(r) for r in rows))

    @property
    def dim(self) -> int:
        return len(self.rows)

    def __mul__(self, other: "BigMatrix") -> "BigMatrix":
        return mat_mul(self, other)

    def __pow__(self, k: int) -> "BigMatrix":
        base = self if k >= 0 else mat_inv_unimodular(self)
        out = BigMatrix.identity(self.dim)
        for _ in range(abs(k)):
            out = out * base
        return out

    def __sub__(self, other: "BigMatrix") -> "BigMatrix":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        return BigMatrix(tuple(tuple(a - b for a, b in zip(ra, rb))
                               for ra, rb in zip(self.rows, other.rows)))

    def transpose(self) -> "BigMatrix":
        return BigMatrix(tuple(zip(*self.rows)))

    def det(self) -> int:
        return det(self)

    def inv(self) -> "BigMatrix":
        return mat_inv_unimodular(self)

    def reduce(self, m: int) -> "ModMatrix":
        return reduce_mod(self, m)

    def max_abs(self) -> int:
        return max(abs(e) for row in self.rows for e in row)

    def is_identity(self) -> bool:
        return self.rows == BigMatrix.identity(self.dim).rows


@dataclass(frozen=True)
class ModMatrix:
    """Immutable square residue matrix; entries normalized into [0, modulus)."""

    rows: tuple
    modulus: int

    def __post_init__(self):
        m = int(self.modulus)
        if m < 2:
            raise ValueError("modulus must be >= 2")
        rows = tuple(tuple(int(e) % m for e in row) for row in self.rows)
        n = len(rows)
        if n not in (2, 3) or any(len(r) != n for r in rows):
            raise ValueError("matrix must be square of dimension 2 or 3")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "modulus", m)

    @staticmethod
    def identity(dim: int, m: int) -> "ModMatrix":
        return ModMatrix(tuple(tuple(int(i == j) for j in range(dim)) for i in range(dim)), m)

    @property
    def dim(self) -> int:
        return len(self.rows)

    def __mul__(self, other: "ModMatrix") -> "ModMatrix":
        if self.modulus != other.modulus:
            raise ValueError("modulus mismatch")
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        m = self.modulus
        n = self.dim
        a, b = self.rows, other.rows
        return ModMatrix(tuple(tuple(sum(a[i][k] * b[k][j] for k in range(n)) % m
                                     for j in range(n)) for i in range(n)), m)

    def __pow__(self, k: int) -> "ModMatrix":
        base = self if k >= 0 else self.inv()
        out = ModMatrix.identity(self.dim, self.modulus)
        for _ in range(abs(k)):
            out = out * base
        return out

    def det(self) -> int:
        return _det_rows(self.rows) % self.modulus

    def inv(self) -> "ModMatrix":
        m = self.modulus
        d = self.det()
        if gcd(d, m) != 1:
            raise ValueError("determinant is not a unit mod modulus")
        di = pow(d, -1, m)
        adj = _adjugate_rows(self.rows)
        return ModMatrix(tuple(tuple((di * e) % m for e in row) for row in adj), m)

    def transpose(self) -> "ModMatrix":
        return ModMatrix(tuple(zip(*self.rows)), self.modulus)

    def lift_naive(self) -> BigMatrix:
        """Entrywise lift with residues in [0, modulus); det usually not 1."""
        return BigMatrix(self.rows)

    def is_identity(self) -> bool:
        return self.rows == ModMatrix.identity(self.dim, self.modulus).rows


def mat_mul(a: BigMatrix, b: BigMatrix) -> BigMatrix:
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    n = a.dim
    ra, rb = a.rows, b.rows
    return BigMatrix(tuple(tuple(sum(ra[i][k] * rb[k][j] for k in range(n))
                                 for j in range(n)) for i in range(n)))


def _det_rows(rows):
    if len(rows) == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    a = rows
    return (a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]))


def _adjugate_rows(rows):
    n = len(rows)
    if n == 2:
        return ((rows[1][1], -rows[0][1]), (-rows[1][0], rows[0][0]))
    cof = [[0] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            rs = [r for r in range(3) if r != i]
            cs = [c for c in range(3) if c != j]
            minor = rows[rs[0]][cs[0]] * rows[rs[1]][cs[1]] - rows[rs[0]][cs[1]] * rows[rs[1]][cs[0]]
            cof[i][j] = (-1) ** (i + j) * minor
    return tuple(zip(*cof))


def det(a: BigMatrix) -> int:
    return _det_rows(a.rows)


def mat_inv_unimodular(a: BigMatrix) -> BigMatrix:
    d = det(a)
    if d not in (1, -1):
        raise ValueError(f"matrix is not unimodular (det = {d})")
    adj = _adjugate_rows(a.rows)
    return BigMatrix(tuple(tuple(d * e for e in row) for row in adj))


def reduce_mod(a: BigMatrix, m: int) -> ModMatrix:
    if m < 2:
        raise ValueError("modulus must be >= 2")
    return ModMatrix(a.rows, m)


def smith_normal_form(a) -> tuple:
    """Invariant factors d_1 | d_2 | ... of a rectangular integer matrix.

    Smallest-nonzero-entry pivoting with remainder reduction along the
    pivot row and column.  Entries stay near the gcd scale instead of
    exploding, which is all the 12x6 systems here need.  Trailing zeros
    pad the result to min(rows, cols) when the rank is deficient.
    """
    work = [[int(e) for e in row] for row in a]
    r = len(work)
    c = len(work[0]) if r else 0
    if any(len(row) != c for row in work):
        raise ValueError("ragged matrix")
    n = min(r, c)
    factors = []
    t = 0
    while t < n:
        piv = None
        best = None
        for i in range(t, r):
            for j in range(t, c):
                e = abs(work[i][j])
                if e and (best is None or e < best):
                    best = e
                    piv = (i, j)
        if piv is None:
            break
        pi, pj = piv
        if pi != t:
            work[t], work[pi] = work[pi], work[t]
        if pj != t:
            for row in work:
                row[t], row[pj] = row[pj], row[t]
        p = work[t][t]
        dirty = False
        for i in range(t + 1, r):
            if work[i][t]:
                q = work[i][t] // p
                if q:
                    work[i] = [x - q * y for x, y in zip(work[i], work[t])]
                if work[i][t]:
                    dirty = True
        for j in range(t + 1, c):
            if work[t][j]:
                q = work[t][j] // p
                if q:
                    for row in work:
                        row[j] -= q * row[t]
                if work[t][j]:
                    dirty = True
        if dirty:
            continue
        # the divisibility chain needs the pivot to divide the whole block
        off_row = None
        for i in range(t + 1, r):
            if any(work[i][j] % p for j in range(t + 1, c)):
                off_row = i
                break
        if off_row is not None:
            work[t] = [x + y for x, y in zip(work[t], work[off_row])]
            continue
        factors.append(abs(p))
        t += 1
    factors.extend([0] * (n - len(factors)))
    return tuple(factors)


def nullspace_mod_p(a, p: int) -> tuple:
    """Basis of the right kernel over F_p; empty tuple means trivial kernel.

    p must be prime (residue inversion raises otherwise, per the caller
    contract).  Returns tuples of residues, one per free column.
    """
    rows = [[int(e) % p for e in row] for row in a]
    r = len(rows)
    c = len(rows[0]) if r else 0
    pivots = []
    rank = 0
    for col in range(c):
        sel = None
        for i in range(rank, r):
            if rows[i][col]:
                sel = i
                break
        if sel is None:
            continue
        rows[rank], rows[sel] = rows[sel], rows[rank]
        inv = pow(rows[rank][col], -1, p)
        rows[rank] = [(x * inv) % p for x in rows[rank]]
        for i in range(r):
            if i != rank and rows[i][col]:
                f = rows[i][col]
                rows[i] = [(x - f * y) % p for x, y in zip(rows[i], rows[rank])]
        pivots.append(col)
        rank += 1
    pivot_set = set(pivots)
    basis = []
    for free in range(c):
        if free in pivot_set:
            continue
        v = [0] * c
        v[free] = 1
        for k, col in enumerate(pivots):
            v[col] = (-rows[k][free]) % p
        basis.append(tuple(v))
    return tuple(basis)


def _nearest_div(num: int, den: int) -> int:
    """Nearest integer to num/den for den > 0, ties toward +infinity."""
    return (2 * num + den) // (2 * den)


def _tidy_congruence(g: BigMatrix, m: int) -> BigMatrix:
    """Shrink entries with greedy level-m shear moves on rows and columns.

    Left-multiplying by I + c*m*E_ij (or right-multiplying the column
    variant) stays in the same residue class mod m and keeps det = 1, so
    any sequence of these moves is a valid rewrite of a lift.  Greedy
    least-squares step per (row, row) pair, with the two neighbors of the
    optimum tried as well since the optimum is a rounded rational.
    """
    rows = [list(r) for r in g.rows]
    n = len(rows)

    def ssq(v):
        return sum(e * e for e in v)

    improved = True
    while improved:
        improved = False
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                den = m * ssq(rows[j])
                if den == 0:
                    continue
                c = _nearest_div(-sum(x * y for x, y in zip(rows[i], rows[j])), den)
                for cc in (c, c - 1, c + 1, 1, -1):
                    if not cc:
                        continue
                    cand = [x + cc * m * y for x, y in zip(rows[i], rows[j])]
                    if ssq(cand) < ssq(rows[i]):
                        rows[i] = cand
                        improved = True
                        break
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                coli = [rows[k][i] for k in range(n)]
                colj = [rows[k][j] for k in range(n)]
                den = m * ssq(colj)
                if den == 0:
                    continue
                c = _nearest_div(-sum(x * y for x, y in zip(coli, colj)), den)
                for cc in (c, c - 1, c + 1, 1, -1):
                    if not cc:
                        continue
                    cand = [x + cc * m * y for x, y in zip(coli, colj)]
                    if ssq(cand) < ssq(coli):
                        for k in range(n):
                            rows[k][i] = cand[k]
                        improved = True
                        break
    return BigMatrix(tuple(tuple(r) for r in rows))


def lift_to_sl(x: ModMatrix, tidy: bool = True) -> BigMatrix:
    """Integer matrix with det exactly 1 that reduces to x mod its modulus.

    Gaussian elimination over Z/m factors x into elementary transvections
    (unit pivots always exist because det(x) is a unit; for prime moduli a
    single row addition fixes a zero pivot).  The diagonal left over by
    triangularization is cleared in place with the block identity

        diag(u, u^{-1}) = E12(u) E21(-u^{-1}) E12(u) E12(-1) E21(1) E12(-1)

    so the factorization is elementary throughout.  Each factor lifts
    entrywise with a centered residue and the product is the lift; a
    final pass of level-m shears trims entry growth (without it the raw
    product scales like m^k for k factors).
    """
    m = x.modulus
    n = x.dim
    if x.det() != 1 % m:
        raise ValueError("det is not 1 mod modulus")
    a = [list(row) for row in x.rows]
    ops = []

    def row_add(i, j, coef):
        coef %= m
        if coef == 0:
            return
        a[i] = [(u + coef * v) % m for u, v in zip(a[i], a[j])]
        ops.append((i, j, coef))

    def is_unit(v):
        return gcd(v % m, m) == 1

    for k in range(n):
        if not is_unit(a[k][k]):
            done = False
            for i in range(k + 1, n):
                for t in range(1, 64):
                    if is_unit(a[k][k] + t * a[i][k]):
                        row_add(k, i, t)
                        done = True
                        break
                if done:
                    break
            if not done:
                raise ValueError("no unit pivot found; modulus too composite for this lift")
        pinv = pow(a[k][k], -1, m)
        for i in range(k + 1, n):
            if a[i][k]:
                row_add(i, k, -a[i][k] * pinv)
    for k in range(n - 1, 0, -1):
        pinv = pow(a[k][k], -1, m)
        for i in range(k):
            if a[i][k]:
                row_add(i, k, -a[i][k] * pinv)
    # a is now diag(d_0..d_{n-1}) with product 1 mod m; clear it blockwise.
    # Left-multiplying by the six-factor identity means applying the
    # factors right-to-left as row operations.
    for k in range(n - 1):
        d = a[k][k]
        if d == 1:
            continue
        u = pow(d, -1, m)
        row_add(k, k + 1, -1)
        row_add(k + 1, k, 1)
        row_add(k, k + 1, -1)
        row_add(k, k + 1, u)
        row_add(k + 1, k, -d)
        row_add(k, k + 1, u)
    if any(a[i][j] != (1 if i == j else 0) for i in range(n) for j in range(n)):
        raise RuntimeError("elimination did not reach the identity")
    # a = E_1 ... E_t x = I, so x is the product of the inverted factors
    # in recorded order.
    g = BigMatrix.identity(n)
    for (i, j, c) in ops:
        cc = (-c) % m
        if cc > m - cc:
            cc -= m
        g = g * BigMatrix.elementary(n, i, j, cc)
    if tidy:
        g = _tidy_congruence(g, m)
    if reduce_mod(g, m).rows != x.rows:
        raise RuntimeError("lift does not reduce to its input")
    if det(g) != 1:
        raise RuntimeError("lift determinant is not 1")
    return g
