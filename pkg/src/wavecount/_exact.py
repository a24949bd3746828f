"""Small exact linear algebra over the rationals (lists of Fractions)."""
from fractions import Fraction
from math import gcd, lcm


def frac(x):
    return x if isinstance(x, Fraction) else Fraction(x)


def fvec(v):
    return [frac(x) for x in v]


def fmat(rows):
    return [fvec(r) for r in rows]


def dot(u, v):
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


def rref(rows):
    """Reduced row echelon form; returns (rows, pivot columns)."""
    m = [list(r) for r in rows]
    if not m:
        return m, []
    ncol = len(m[0])
    pivots = []
    r = 0
    for c in range(ncol):
        p = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows):
    return len(rref(rows)[1]) if rows else 0


def row_basis(rows, dim=None):
    """Canonical basis (RREF rows) of the span of `rows`."""
    rows = [fvec(r) for r in rows if any(x != 0 for x in r)]
    if not rows:
        return []
    return rref(rows)[0]


def nullspace(rows, ncol):
    """Basis of {x : rows x = 0}."""
    if not rows:
        return [[Fraction(int(i == j)) for j in range(ncol)] for i in range(ncol)]
    red, piv = rref(rows)
    free = [c for c in range(ncol) if c not in piv]
    out = []
    for f in free:
        x = [Fraction(0)] * ncol
        x[f] = Fraction(1)
        for row, pc in zip(red, piv):
            x[pc] = -row[f]
        out.append(x)
    return out


def in_span(v, basis):
    if not any(x != 0 for x in v):
        return True
    return rank(basis + [v]) == rank(basis) if basis else False


def coordinates(v, basis):
    """Solve sum c_i basis_i = v exactly; None if v is outside the span."""
    k = len(basis)
    n = len(v)
    aug = [[basis[i][j] for i in range(k)] + [v[j]] for j in range(n)]
    red, piv = rref(aug)
    if k in piv:
        return None
    c = [Fraction(0)] * k
    for row, pc in zip(red, piv):
        c[pc] = row[k]
    return c


def sum_spaces(a, b):
    return row_basis(list(a) + list(b))


def intersect_spaces(a, b, dim):
    """Intersection of two spans, via the kernel of [A | -B]."""
    if not a or not b:
        return []
    rows = [[a[i][j] for i in range(len(a))] + [-b[i][j] for i in range(len(b))] for j in range(dim)]
    ker = nullspace(rows, len(a) + len(b))
    vecs = [[sum((k[i] * a[i][j] for i in range(len(a))), Fraction(0)) for j in range(dim)] for k in ker]
    return row_basis(vecs)


def orth_complement(sub, ambient, dim):
    """Orthogonal complement of `sub` inside span(`ambient`), standard inner product."""
    if not ambient:
        return []
    if not sub:
        return row_basis(ambient)
    # x = sum c_i ambient_i with <x, s> = 0 for s in sub
    rows = [[dot(amb, s) for amb in ambient] for s in sub]
    ker = nullspace(rows, len(ambient))
    vecs = [[sum((k[i] * ambient[i][j] for i in range(len(ambient))), Fraction(0)) for j in range(dim)] for k in ker]
    return row_basis(vecs)


def primitive(v):
    """Positive multiple of v with coprime integer entries."""
    den = 1
    for x in v:
        den = lcm(den, x.denominator)
    ints = [int(x * den) for x in v]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    if g == 0:
        return [Fraction(0)] * len(v)
    return [Fraction(x // g) for x in ints]


def matmul(a, b):
    return [[sum((a[i][k] * b[k][j] for k in range(len(b))), Fraction(0)) for j in range(len(b[0]))]
            for i in range(len(a))]


def identity(n):
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def det(m):
    m = [list(r) for r in m]
    n = len(m)
    d = Fraction(1)
    for c in range(n):
        p = next((i for i in range(c, n) if m[i][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            m[c], m[p] = m[p], m[c]
            d = -d
        d *= m[c][c]
        for i in range(c + 1, n):
            f = m[i][c] / m[c][c]
            if f:
                m[i] = [a - f * b for a, b in zip(m[i], m[c])]
    return d


def inverse(m):
    n = len(m)
    aug = [list(m[i]) + identity(n)[i] for i in range(n)]
    red, piv = rref(aug)
    if piv[:n] != list(range(n)):
        raise ZeroDivisionError("singular matrix")
    return [row[n:] for row in red]


def transpose(m):
    return [list(r) for r in zip(*m)]
