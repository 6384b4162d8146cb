"""Dense f64 linear algebra kernels.

Everything operates on plain numpy arrays validated by :func:`as_vector` /
:func:`as_square`.  The LU factorization is implemented here (partial
pivoting, explicit 1e-300 pivot threshold) so determinants and solves share
one code path; symmetric eigenvalue bounds delegate to LAPACK via
``numpy.linalg.eigvalsh``.  All kernels are pure functions and run-to-run
deterministic for fixed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import SeededRng

PIVOT_THRESHOLD = 1e-300


class SingularMatrixError(ValueError):
    """LU factorization hit a pivot below the singularity threshold."""


class NotSymmetricError(ValueError):
    """Symmetric eigen-solver was handed an asymmetric matrix."""


@dataclass(frozen=True)
class EigenBounds:
    lambda_min: float
    lambda_max: float


def as_vector(x, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError(f"{name} must be a 1-d array of length >= 1")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def as_matrix(m, name: str = "M") -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.size < 1:
        raise ValueError(f"{name} must be a non-empty 2-d array")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def as_square(m, name: str = "M") -> np.ndarray:
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def max_abs(m: np.ndarray) -> float:
    return float(np.max(np.abs(m)))


def matvec(m, x) -> np.ndarray:
    """Matrix-vector product Mx with explicit dimension checking."""
    m = as_matrix(m)
    x = as_vector(x)
    if m.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {m.shape} @ {x.shape}")
    return m @ x


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return a @ b


@dataclass
class LuFactors:
    """Packed LU factors of PA = LU with row-pivot record."""

    lu: np.ndarray
    piv: np.ndarray
    sign: float


def lu_factor(m) -> LuFactors:
    """LU with partial pivoting; raises on pivots below 1e-300."""
    a = as_square(m).copy()
    n = a.shape[0]
    piv = np.arange(n)
    sign = 1.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) < PIVOT_THRESHOLD:
            raise SingularMatrixError(f"pivot {a[p, k]!r} at column {k}")
        if p != k:
            a[[k, p], :] = a[[p, k], :]
            piv[[k, p]] = piv[[p, k]]
            sign = -sign
        a[k + 1:, k] /= a[k, k]
        if k + 1 < n:
            a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:])
    return LuFactors(a, piv, sign)


def lu_solve(f: LuFactors, b) -> np.ndarray:
    b = as_vector(b, "b")
    n = f.lu.shape[0]
    if b.shape[0] != n:
        raise ValueError(f"dimension mismatch: matrix is {n}x{n}, b has length {b.shape[0]}")
    y = b[f.piv].copy()
    for k in range(1, n):
        y[k] -= f.lu[k, :k] @ y[:k]
    x = y
    for k in range(n - 1, -1, -1):
        if k + 1 < n:
            x[k] -= f.lu[k, k + 1:] @ x[k + 1:]
        x[k] /= f.lu[k, k]
    return x


def lu_det(f: LuFactors) -> float:
    return float(f.sign * np.prod(np.diag(f.lu)))


def lu_slogdet(f: LuFactors) -> tuple[float, float]:
    """(sign, log|det|) from the factors, overflow-safe."""
    d = np.diag(f.lu)
    sign = f.sign * float(np.prod(np.sign(d)))
    return sign, float(np.sum(np.log(np.abs(d))))


def lu_det_and_solve(m, b) -> tuple[float, np.ndarray]:
    """Determinant via LU with partial pivoting plus the solve of Mx = b."""
    f = lu_factor(m)
    return lu_det(f), lu_solve(f, b)


def sym_eig_bounds(m) -> EigenBounds:
    """Extreme eigenvalues of a symmetric matrix.

    Input must satisfy ||M - M^T||_max <= 1e-10 * ||M||_max; the solve runs
    on the symmetrized matrix so both triangles contribute.
    """
    m = as_square(m)
    scale = max_abs(m)
    if max_abs(m - m.T) > 1e-10 * scale:
        raise NotSymmetricError(
            f"asymmetry {max_abs(m - m.T):.3e} exceeds 1e-10 * {scale:.3e}"
        )
    w = np.linalg.eigvalsh(0.5 * (m + m.T))
    return EigenBounds(float(w[0]), float(w[-1]))


def power_iteration_sigma_max(m, iters: int = 1000, tol: float = 1e-10,
                              rng: SeededRng | None = None) -> float:
    """Largest singular value of M via power iteration on M^T M."""
    sigma, _, _ = power_iteration_detail(m, iters, tol, rng)
    return sigma


def power_iteration_detail(m, iters: int = 1000, tol: float = 1e-10,
                           rng: SeededRng | None = None) -> tuple[float, float, int]:
    """Power iteration returning (sigma_max, achieved residual, iterations).

    The residual is ||B z - lam z|| / max(lam, tiny) for B = M^T M at the
    final iterate; for symmetric B it bounds the distance from lam to the
    spectrum, so (residual <= tol) certifies relative accuracy ~tol in
    sigma^2.
    """
    m = as_square(m)
    n = m.shape[0]
    if rng is None:
        rng = SeededRng(0x51E0)
    b = m.T @ m
    z = rng.standard_normal(n)
    nz = np.linalg.norm(z)
    if nz == 0.0 or max_abs(b) == 0.0:
        return 0.0, 0.0, 0
    z /= nz
    lam = 0.0
    residual = np.inf
    used = 0
    for it in range(1, max(1, int(iters)) + 1):
        w = b @ z
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # z is in the null space; restart from a fresh direction.
            z = rng.standard_normal(n)
            z /= np.linalg.norm(z)
            continue
        z_new = w / nw
        lam = float(z_new @ (b @ z_new))
        residual = float(np.linalg.norm(b @ z_new - lam * z_new) / max(lam, 1e-300))
        z = z_new
        used = it
        if residual <= tol:
            break
    return float(np.sqrt(max(lam, 0.0))), residual, used
