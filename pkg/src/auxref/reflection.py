"""The input-dependent reflection layer f(x) = H(Wx) x.

The layer reflects each input around the axis Wx, a nonlinear map that
preserves norms.  With W = I - U it reproduces the action of any orthogonal
U in a single pass, which is what makes it a drop-in replacement for a
whole chain of fixed reflections.

Writing u = Wx, s = x.Wx, q = ||u||^2 and c = 2s/q, the map is

    f(x) = x - c u,

its Jacobian is the rank-one update

    J = H(u) A - (2/q) u (W^T x)^T,      A = I - c W,

and |det J| follows from the matrix determinant lemma as
det(A) (1 + 2 (W^T x) . A^{-1} u / q) with an extra sign flip from
det(H(u)) = -1.  All operations here exploit that structure; nothing
materializes H(u).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    SingularMatrixError,
    as_matrix,
    as_square,
    as_vector,
    lu_factor,
    lu_slogdet,
    lu_solve,
    max_abs,
)

EPS_DEGENERATE = 1e-24


class DegenerateInputError(ValueError):
    """Jacobian quantities requested at x = 0 or Wx ~ 0, where f is defined
    by convention but not differentiable."""


class SingularAError(ValueError):
    """The linear part A = I - cW is singular; the rank-one determinant
    formula has no fast path at this input."""


@dataclass(frozen=True)
class JacobianParts:
    """Jacobian J with the shared subexpressions A = I - cW, u = Wx and
    c = 2 x.Wx / ||Wx||^2 cached for reuse by determinant and solver code."""

    J: np.ndarray
    A: np.ndarray
    u: np.ndarray
    c: float


@dataclass(frozen=True)
class SymEigCache:
    """Eigendecomposition W = Q diag(lam) Q^T of a symmetric weight matrix."""

    Q: np.ndarray
    lam: np.ndarray


class AuxReflection:
    """Reflection layer parameterized by a square weight matrix W."""

    def __init__(self, w):
        self.W = as_square(w, "W")
        self.dim = self.W.shape[0]
        # Scale for the relative degeneracy test on ||Wx||^2.
        self._wmax2 = max_abs(self.W) ** 2

    @classmethod
    def from_orthogonal(cls, u) -> "AuxReflection":
        """Layer with W = I - U, which maps every x to Ux.

        Works because ||Ux|| = ||x|| lets the reflection around x - Ux carry
        x onto Ux; fixed points of U give Wx = 0 and the degeneracy
        convention returns x = Ux there, so the identity holds everywhere.
        """
        u = as_square(u, "U")
        defect = max_abs(u.T @ u - np.eye(u.shape[0]))
        if defect > 1e-8:
            raise ValueError(f"U is not orthogonal: ||U^T U - I||_max = {defect:.3e}")
        return cls(np.eye(u.shape[0]) - u)

    def _degenerate_threshold(self, xnorm2: float) -> float:
        return EPS_DEGENERATE * max(1.0, self._wmax2 * xnorm2)

    def degenerate_mask(self, x_cols) -> np.ndarray:
        """Boolean mask of batch columns where the axis Wx is too small for
        derivatives to exist (zero inputs included)."""
        x_cols = as_matrix(x_cols, "X")
        u = self.W @ x_cols
        q = np.sum(u * u, axis=0)
        xnorm2 = np.sum(x_cols * x_cols, axis=0)
        return q <= EPS_DEGENERATE * np.maximum(1.0, self._wmax2 * xnorm2)

    def forward(self, x) -> np.ndarray:
        """Evaluate f(x); f(0) = 0 and degenerate Wx returns x unchanged."""
        x = as_vector(x, "x")
        return self.forward_batch(x[:, None])[:, 0]

    def forward_batch(self, x_cols) -> np.ndarray:
        """Columnwise forward map: one matmul WX, then per-column reflection."""
        x_cols = as_matrix(x_cols, "X")
        if x_cols.shape[0] != self.dim:
            raise ValueError(f"batch has {x_cols.shape[0]} rows, layer dim is {self.dim}")
        u = self.W @ x_cols
        q = np.sum(u * u, axis=0)
        s = np.sum(x_cols * u, axis=0)
        xnorm2 = np.sum(x_cols * x_cols, axis=0)
        degenerate = q <= EPS_DEGENERATE * np.maximum(1.0, self._wmax2 * xnorm2)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = x_cols - u * (2.0 * s / q)[None, :]
        if np.any(degenerate):
            out[:, degenerate] = x_cols[:, degenerate]
            out[:, xnorm2 == 0.0] = 0.0
        return out

    def _parts(self, x) -> tuple[np.ndarray, np.ndarray, float, float]:
        """(x, u, q, c) with degeneracy checking; shared by the Jacobian ops."""
        x = as_vector(x, "x")
        if x.shape[0] != self.dim:
            raise ValueError(f"x has length {x.shape[0]}, layer dim is {self.dim}")
        xnorm2 = float(x @ x)
        if xnorm2 == 0.0:
            raise DegenerateInputError("Jacobian undefined at x = 0")
        u = self.W @ x
        q = float(u @ u)
        if q <= self._degenerate_threshold(xnorm2):
            raise DegenerateInputError(f"||Wx||^2 = {q!r} is degenerate at this x")
        c = 2.0 * float(x @ u) / q
        return x, u, q, c

    def jacobian(self, x) -> JacobianParts:
        """Exact Jacobian, O(d^2) beyond the two matvecs."""
        x, u, q, c = self._parts(x)
        a = np.eye(self.dim) - c * self.W
        ha = a - np.outer(u, (2.0 / q) * (u @ a))
        j = ha - np.outer(u, (2.0 / q) * (self.W.T @ x))
        return JacobianParts(j, a, u, c)

    def symmetric_cache(self) -> SymEigCache:
        """Precompute the eigendecomposition of a symmetric W so repeated
        log-determinants cost O(d^2) per input instead of an LU each."""
        asym = max_abs(self.W - self.W.T)
        if asym > 1e-10 * max(1.0, max_abs(self.W)):
            raise ValueError(f"W is not symmetric: asymmetry {asym:.3e}")
        lam, qmat = np.linalg.eigh(0.5 * (self.W + self.W.T))
        return SymEigCache(qmat, lam)

    def log_abs_det_jacobian(self, x, cache: SymEigCache | None = None) -> tuple[float, float]:
        """(log|det J|, sign) via the rank-one determinant identity.

        det J = -det(A) (1 + 2 (W^T x) . A^{-1} u / ||u||^2); the generic
        path takes one LU of A, the cached path uses the eigenvalues of a
        symmetric W directly.
        """
        x, u, q, c = self._parts(x)
        v = self.W.T @ x
        if cache is None:
            try:
                f = lu_factor(np.eye(self.dim) - c * self.W)
            except SingularMatrixError as exc:
                raise SingularAError(str(exc)) from exc
            sign_a, log_a = lu_slogdet(f)
            ainv_u = lu_solve(f, u)
        else:
            lam_a = 1.0 - c * cache.lam
            if np.min(np.abs(lam_a)) < 1e-300:
                raise SingularAError("A has a zero eigenvalue at this x")
            sign_a = float(np.prod(np.sign(lam_a)))
            log_a = float(np.sum(np.log(np.abs(lam_a))))
            ainv_u = cache.Q @ ((cache.Q.T @ u) / lam_a)
        correction = 1.0 + 2.0 * float(v @ ainv_u) / q
        if correction == 0.0:
            return float("-inf"), 0.0
        sign = -sign_a * float(np.sign(correction))
        return log_a + float(np.log(abs(correction))), sign

    def vjp_x(self, x, g) -> np.ndarray:
        """J^T g in O(d^2) without materializing J."""
        g = as_vector(g, "g")
        x, u, q, c = self._parts(x)
        if g.shape[0] != self.dim:
            raise ValueError("g has the wrong length")
        hg = g - u * (2.0 * float(u @ g) / q)
        return hg - c * (self.W.T @ hg) - (self.W.T @ x) * (2.0 * float(u @ g) / q)

    def vjp_w(self, x, g) -> np.ndarray:
        """Gradient of g.f(x) with respect to W.

        Differentiating f = x - (2 s / q) u through s = x.Wx, q = ||Wx||^2
        and u = Wx collapses to a rank-one matrix a x^T with
        a = -(2/q) (p x + s g - (2 s p / q) u) and p = g.u.
        """
        g = as_vector(g, "g")
        x, u, q, c = self._parts(x)
        if g.shape[0] != self.dim:
            raise ValueError("g has the wrong length")
        s = 0.5 * c * q
        p = float(g @ u)
        a = -(2.0 / q) * (p * x + s * g - (2.0 * s * p / q) * u)
        return np.outer(a, x)
