"""Small dense real linear algebra built from first principles.

Everything in here targets matrices of dimension 20 or less, which is the
regime the rest of the package lives in. numpy arrays are used as the storage
and arithmetic substrate, but the algorithms themselves (LU with partial
pivoting, Cholesky with pivot projection, Hessenberg reduction, the Francis
double-shift QR iteration, and the Kronecker-vectorization Stein solver) are
implemented here rather than delegated to LAPACK wrappers, so every numeric
claim made by the higher layers can be traced to code in this file.

All public operations take and return immutable :class:`Matrix` values.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidArgument,
    NoConvergence,
    NotPSD,
    NotSymmetric,
    ResonantSpectrum,
    SingularMatrix,
)

# classification verdicts returned by psd_check
PD = "PD"
PSD = "PSD"
INDEFINITE = "Indefinite"

# default tolerances; every operation that uses one accepts an override
PIVOT_RTOL = 1e-12
SYMMETRY_RTOL = 1e-9
EIG_TOL = 1e-8
STEIN_RESONANCE_TOL = 1e-9

_QR_MAX_SWEEPS = 40


class Matrix:
    """Immutable dense real matrix in row-major order.

    Entries are validated to be finite at construction; NaN and Inf never
    enter a Matrix. Vectors are represented as 1-row or 1-column matrices.
    """

    __slots__ = ("_a",)

    def __init__(self, data):
        a = np.array(data, dtype=float)
        if a.ndim == 1:
            a = a.reshape(1, -1)
        if a.ndim != 2:
            raise InvalidArgument(f"Matrix data must be 2-dimensional, got ndim={a.ndim}")
        if a.size and not np.all(np.isfinite(a)):
            raise InvalidArgument("Matrix entries must be finite")
        a.setflags(write=False)
        self._a = a

    # -- construction helpers -------------------------------------------------

    @classmethod
    def zeros(cls, rows, cols=None):
        return cls(np.zeros((rows, rows if cols is None else cols)))

    @classmethod
    def eye(cls, n):
        return cls(np.eye(n))

    @classmethod
    def diag(cls, values):
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def row(cls, values):
        return cls(np.asarray(values, dtype=float).reshape(1, -1))

    @classmethod
    def col(cls, values):
        return cls(np.asarray(values, dtype=float).reshape(-1, 1))

    # -- views ----------------------------------------------------------------

    @property
    def a(self):
        """Read-only ndarray view of the entries."""
        return self._a

    @property
    def rows(self):
        return self._a.shape[0]

    @property
    def cols(self):
        return self._a.shape[1]

    @property
    def shape(self):
        return self._a.shape

    @property
    def T(self):
        return Matrix(self._a.T)

    def tolist(self):
        return self._a.tolist()

    def __getitem__(self, idx):
        out = self._a[idx]
        return float(out) if np.ndim(out) == 0 else Matrix(out)

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        return Matrix(self._a + _entries(other))

    def __sub__(self, other):
        return Matrix(self._a - _entries(other))

    def __neg__(self):
        return Matrix(-self._a)

    def __mul__(self, scalar):
        return Matrix(self._a * float(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return Matrix(self._a @ _entries(other))

    def __eq__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._a, other._a))

    def __hash__(self):
        return hash((self.shape, self._a.tobytes()))

    def __repr__(self):
        return f"Matrix({self._a.tolist()!r})"


def _entries(x):
    return x.a if isinstance(x, Matrix) else np.asarray(x, dtype=float)


def trace(A):
    return float(np.trace(_entries(A)))


def max_abs(A):
    a = _entries(A)
    return float(np.max(np.abs(a))) if a.size else 0.0


# ---------------------------------------------------------------------------
# LU factorization, linear solves, determinant
# ---------------------------------------------------------------------------


def _lu_factor(a, pivot_rtol=PIVOT_RTOL):
    """Doolittle LU with partial pivoting, in place on a copy.

    Returns (lu, perm, parity). Raises SingularMatrix when the best available
    pivot falls below pivot_rtol * max|A|.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape[1] != n:
        raise DimensionMismatch(f"square matrix required, got {a.shape}")
    tol = pivot_rtol * (np.max(np.abs(a)) if a.size else 0.0)
    perm = np.arange(n)
    parity = 1.0
    for j in range(n):
        p = j + int(np.argmax(np.abs(a[j:, j])))
        if abs(a[p, j]) <= tol:
            raise SingularMatrix(f"pivot {a[p, j]:.3e} below tolerance {tol:.3e} at column {j}")
        if p != j:
            a[[j, p], :] = a[[p, j], :]
            perm[[j, p]] = perm[[p, j]]
            parity = -parity
        a[j + 1 :, j] /= a[j, j]
        a[j + 1 :, j + 1 :] -= np.outer(a[j + 1 :, j], a[j, j + 1 :])
    return a, perm, parity


def _lu_solve_arrays(a, b, pivot_rtol=PIVOT_RTOL):
    lu, perm, _ = _lu_factor(a, pivot_rtol)
    n = lu.shape[0]
    x = np.array(b, dtype=float)[perm]
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    # forward substitution (unit lower triangle)
    for i in range(1, n):
        x[i] -= lu[i, :i] @ x[:i]
    # back substitution
    for i in range(n - 1, -1, -1):
        if i + 1 < n:
            x[i] -= lu[i, i + 1 :] @ x[i + 1 :]
        x[i] /= lu[i, i]
    return x


def lu_solve(A, B, pivot_rtol=PIVOT_RTOL):
    """Solve A X = B by LU factorization with partial pivoting.

    Parameters
    ----------
    A : Matrix, square
    B : Matrix with B.rows == A.rows

    Raises
    ------
    SingularMatrix
        when a pivot magnitude falls below pivot_rtol * max|A|.
    """
    a = _entries(A)
    b = _entries(B)
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"B has {b.shape[0]} rows, A is {a.shape[0]}x{a.shape[1]}")
    return Matrix(_lu_solve_arrays(a, b, pivot_rtol))


def determinant(A, pivot_rtol=PIVOT_RTOL):
    """det(A) as the signed product of LU pivots; singular input gives 0."""
    a = _entries(A)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"square matrix required, got {a.shape}")
    if a.shape[0] == 0:
        return 1.0
    try:
        lu, _, parity = _lu_factor(a, pivot_rtol)
    except SingularMatrix:
        return 0.0
    return float(parity * np.prod(np.diag(lu)))


# ---------------------------------------------------------------------------
# Symmetric classification via Cholesky
# ---------------------------------------------------------------------------


def _cholesky_psd(a, tol):
    """Lower Cholesky factor with pivots in [-tol, tol] projected to zero.

    Returns (L, zero_pivots, negative_pivot).
    """
    n = a.shape[0]
    L = np.zeros_like(a)
    zero_pivots = 0
    for i in range(n):
        d = a[i, i] - L[i, :i] @ L[i, :i]
        if d > tol:
            L[i, i] = math.sqrt(d)
            for j in range(i + 1, n):
                L[j, i] = (a[j, i] - L[j, :i] @ L[i, :i]) / L[i, i]
        elif d >= -tol:
            zero_pivots += 1
            # zero pivot: the rest of the column must vanish too, which the
            # residual check in the caller enforces
        else:
            return L, zero_pivots, True
    return L, zero_pivots, False


def psd_check(S, shift=0.0, rtol=1e-10):
    """Classify a symmetric matrix as PD, PSD, or Indefinite.

    Attempts a Cholesky factorization of S - shift*I. PD means every pivot
    exceeded the tolerance; PSD means some pivots were projected to zero but
    the factorization still reproduces the matrix; anything else is
    Indefinite.

    Raises NotSymmetric when the asymmetry of S exceeds the symmetry
    tolerance. The input is symmetrized before factoring either way.
    """
    a = _entries(S)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"square matrix required, got {a.shape}")
    if a.shape[0] == 0:
        return PD
    scale = 1.0 + float(np.max(np.abs(a)))
    if float(np.max(np.abs(a - a.T))) > SYMMETRY_RTOL * scale:
        raise NotSymmetric("input is not symmetric within tolerance")
    a = 0.5 * (a + a.T) - shift * np.eye(a.shape[0])
    tol = rtol * scale
    L, zero_pivots, negative = _cholesky_psd(a, tol)
    if negative:
        return INDEFINITE
    if zero_pivots == 0:
        return PD
    # confirm the projected factorization actually reproduces the matrix;
    # a large residual means a negative direction hid behind a zero pivot
    resid = float(np.max(np.abs(L @ L.T - a)))
    return PSD if resid <= math.sqrt(tol) * scale else INDEFINITE


def chol_psd_factor(S, rtol=1e-10):
    """Lower-triangular L with L L' = S for PSD S (zero pivots tolerated).

    Used for sampling from degenerate Gaussians. Raises NotPSD when a pivot
    is negative beyond tolerance or the projected factor does not reproduce
    the input.
    """
    a = _entries(S)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"square matrix required, got {a.shape}")
    if a.shape[0] == 0:
        return Matrix(np.zeros((0, 0)))
    scale = 1.0 + float(np.max(np.abs(a)))
    if float(np.max(np.abs(a - a.T))) > SYMMETRY_RTOL * scale:
        raise NotSymmetric("input is not symmetric within tolerance")
    a = 0.5 * (a + a.T)
    L, zero_pivots, negative = _cholesky_psd(a, rtol * scale)
    if negative:
        raise NotPSD("negative pivot in Cholesky factorization")
    if zero_pivots:
        resid = float(np.max(np.abs(L @ L.T - a)))
        if resid > math.sqrt(rtol * scale) * scale:
            raise NotPSD("matrix is not positive semidefinite within tolerance")
    return Matrix(L)


# ---------------------------------------------------------------------------
# Eigenvalues: Hessenberg reduction + Francis double-shift QR
# ---------------------------------------------------------------------------


def _hessenberg(a):
    """Householder reduction to upper Hessenberg form (similarity)."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    for j in range(n - 2):
        x = a[j + 1 :, j]
        nx = math.sqrt(float(x @ x))
        if nx == 0.0:
            continue
        v = x.copy()
        v[0] += math.copysign(nx, x[0] if x[0] != 0.0 else 1.0)
        nv = math.sqrt(float(v @ v))
        if nv == 0.0:
            continue
        v /= nv
        a[j + 1 :, :] -= 2.0 * np.outer(v, v @ a[j + 1 :, :])
        a[:, j + 1 :] -= 2.0 * np.outer(a[:, j + 1 :] @ v, v)
    return a


def _hqr(a, max_sweeps=_QR_MAX_SWEEPS):
    """Eigenvalues of an upper Hessenberg matrix by double-shift QR.

    Classic implicit double shift with deflation from the bottom and the
    usual exceptional shift every ten stalled sweeps. Works in place.
    """
    n = a.shape[0]
    eps = np.finfo(float).eps
    anorm = float(np.sum(np.abs(a)))
    if anorm == 0.0:
        return [0j] * n
    eigs = []
    t = 0.0
    nn = n - 1
    while nn >= 0:
        its = 0
        while True:
            # find the smallest l with negligible subdiagonal below it
            for l in range(nn, 0, -1):
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) <= eps * s:
                    a[l, l - 1] = 0.0
                    break
            else:
                l = 0
            x = a[nn, nn]
            if l == nn:
                # one real eigenvalue deflates
                eigs.append(complex(x + t))
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                # 2x2 trailing block deflates
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    lam1 = x + z
                    lam2 = lam1 if z == 0.0 else x - w / z
                    eigs.append(complex(lam1))
                    eigs.append(complex(lam2))
                else:
                    eigs.append(complex(x + p, z))
                    eigs.append(complex(x + p, -z))
                nn -= 2
                break
            if its == max_sweeps:
                raise NoConvergence(f"QR iteration stalled after {max_sweeps} sweeps")
            if its == 10 or its == 20 or (its > 20 and its % 10 == 0):
                # exceptional shift
                t += x
                for i in range(nn + 1):
                    a[i, i] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                y = x = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            # look for two consecutive small subdiagonals
            for m in range(nn - 2, l - 1, -1):
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u <= eps * v:
                    break
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
            for i in range(m + 3, nn + 1):
                a[i, i - 3] = 0.0
            # double QR sweep on rows l..nn, columns m..nn
            for k in range(m, nn):
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k, k - 1] = -a[k, k - 1]
                else:
                    a[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                for j in range(k, nn + 1):
                    p = a[k, j] + q * a[k + 1, j]
                    if k != nn - 1:
                        p += r * a[k + 2, j]
                        a[k + 2, j] -= p * z
                    a[k + 1, j] -= p * y
                    a[k, j] -= p * x
                mmin = nn if nn < k + 3 else k + 3
                for i in range(l, mmin + 1):
                    p = x * a[i, k] + y * a[i, k + 1]
                    if k != nn - 1:
                        p += z * a[i, k + 2]
                        a[i, k + 2] -= p * r
                    a[i, k + 1] -= p * q
                    a[i, k] -= p
    return eigs


def eigenvalues(A):
    """All eigenvalues of a square real matrix, with multiplicity.

    Returns a list of complex numbers in unspecified order. Dimension is
    capped at 20; larger systems are outside this package's scope.
    """
    a = _entries(A)
    n = a.shape[0]
    if a.shape[1] != n:
        raise DimensionMismatch(f"square matrix required, got {a.shape}")
    if n > 20:
        raise InvalidArgument(f"dimension {n} exceeds the supported cap of 20")
    if n == 0:
        return []
    if n == 1:
        return [complex(a[0, 0])]
    return _hqr(_hessenberg(a))


# ---------------------------------------------------------------------------
# Stein / Lyapunov / Sylvester equation
# ---------------------------------------------------------------------------


def stein_solve(A, B, W, resonance_tol=STEIN_RESONANCE_TOL):
    """Unique X with X = A X B' + W, by Kronecker vectorization.

    With row-major vec, vec(A X B') = (A kron B) vec(X), so X solves
    (I - A kron B) vec(X) = vec(W). The dimensions here are small enough
    that the dense k*n system is the simplest trustworthy route.

    Raises ResonantSpectrum when some eigenvalue product lambda_i(A) *
    lambda_j(B) lies within tolerance of 1, in which case the equation is
    singular or nearly so.
    """
    a = _entries(A)
    b = _entries(B)
    w = _entries(W)
    k, n = w.shape
    if a.shape != (k, k) or b.shape != (n, n):
        raise DimensionMismatch(
            f"need A {k}x{k} and B {n}x{n} to match W {k}x{n}, got {a.shape} and {b.shape}"
        )
    if k == 0 or n == 0:
        return Matrix(np.zeros((k, n)))
    for lam in eigenvalues(Matrix(a)):
        for mu in eigenvalues(Matrix(b)):
            prod = lam * mu
            if abs(prod - 1.0) <= resonance_tol * (1.0 + abs(prod)):
                raise ResonantSpectrum(
                    f"eigenvalue product {prod:.12g} is within tolerance of 1"
                )
    lhs = np.eye(k * n) - np.kron(a, b)
    x = _lu_solve_arrays(lhs, w.reshape(-1, 1)).reshape(k, n)
    resid = float(np.max(np.abs(x - a @ x @ b.T - w)))
    wmax = float(np.max(np.abs(w))) if w.size else 0.0
    if resid > 1e-10 * (1.0 + wmax):
        raise NoConvergence(f"Stein solve residual {resid:.3e} exceeds contract")
    return Matrix(x)
