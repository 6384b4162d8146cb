"""Householder reflections and sequential reflection chains.

A reflection around v maps x to x - 2 v (v.x) / ||v||^2, an orthogonal
involution with determinant -1.  Chains of reflections are the baseline
representation of orthogonal matrices here: applying a chain costs one
rank-one update per vector and the updates are inherently sequential.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, as_square, as_vector, max_abs
from .rng import SeededRng

# Degeneracy threshold on ||v||^2: far below any meaningful f64 magnitude,
# safely above underflow noise after squaring.
EPS_V = 1e-24


class DegenerateReflectionError(ValueError):
    """Reflection vector too close to zero to define a hyperplane."""


def reflect(v, x) -> np.ndarray:
    """Apply the reflection around v to x in O(d), no matrix materialized."""
    v = as_vector(v, "v")
    x = as_vector(x, "x")
    if v.shape[0] != x.shape[0]:
        raise ValueError(f"dimension mismatch: v has {v.shape[0]}, x has {x.shape[0]}")
    vv = float(v @ v)
    if vv <= EPS_V:
        raise DegenerateReflectionError(f"||v||^2 = {vv!r} below {EPS_V}")
    return x - v * (2.0 * float(v @ x) / vv)


@dataclass
class ReflectionChain:
    """Ordered reflection vectors v_1..v_k; the empty chain is the identity.

    Application order is right-to-left: v_k touches the input first, so the
    chain acts as the product (reflection around v_1) ... (reflection
    around v_k).
    """

    dim: int
    vectors: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        checked = []
        for i, v in enumerate(self.vectors):
            v = as_vector(v, f"vectors[{i}]")
            if v.shape[0] != self.dim:
                raise ValueError(f"vectors[{i}] has length {v.shape[0]}, expected {self.dim}")
            if float(v @ v) <= EPS_V:
                raise DegenerateReflectionError(f"vectors[{i}] is degenerate")
            checked.append(v)
        self.vectors = checked

    def __len__(self) -> int:
        return len(self.vectors)


def chain_apply(chain: ReflectionChain, x) -> np.ndarray:
    """Apply the chain to a single vector; O(k d)."""
    x = as_vector(x, "x")
    return chain_apply_batch(chain, x[:, None])[:, 0]


def chain_apply_batch(chain: ReflectionChain, x_cols) -> np.ndarray:
    """Apply the chain to every column of a d x n batch.

    Implemented as k sequential rank-one updates over the whole batch; the
    k reflections cannot be fused or reordered, only the columns within one
    update are independent.
    """
    x_cols = as_matrix(x_cols, "X")
    if x_cols.shape[0] != chain.dim:
        raise ValueError(f"batch has {x_cols.shape[0]} rows, chain dim is {chain.dim}")
    out = x_cols.copy()
    for v in reversed(chain.vectors):
        coef = (2.0 / float(v @ v)) * (v @ out)
        out -= np.outer(v, coef)
    return out


def align(x, y) -> np.ndarray:
    """Reflection vector v = x - y mapping x onto y, valid when ||x|| = ||y||.

    Raises on norm mismatch beyond 1e-8 relative and on x ~ y (the caller
    should treat that case as the identity).
    """
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ValueError("x and y must have the same length")
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if abs(nx - ny) > 1e-8 * max(nx, 1e-300):
        raise ValueError(f"norm mismatch: ||x|| = {nx!r}, ||y|| = {ny!r}")
    v = x - y
    if float(v @ v) <= EPS_V:
        raise DegenerateReflectionError("x and y coincide; use the identity")
    return v


def decompose_orthogonal(q) -> ReflectionChain:
    """Reflection chain reproducing the action of an orthogonal matrix.

    Column i of the working matrix is aligned onto +/- e_i by one
    reflection; the sign is chosen so the alignment vector is never formed
    by cancellation.  The residual diagonal is exactly +/-1 for orthogonal
    input and each -1 entry is absorbed by one extra axis reflection, so
    the chain has at most 2d vectors and typically about d.  Reproduction
    accuracy tracks the orthogonality defect of the input.
    """
    q = as_square(q, "Q")
    d = q.shape[0]
    defect = max_abs(q.T @ q - np.eye(d))
    if defect > 1e-8:
        raise ValueError(f"Q is not orthogonal: ||Q^T Q - I||_max = {defect:.3e}")
    m = q.copy()
    vectors: list[np.ndarray] = []
    for i in range(d):
        col = m[i:, i]
        e0 = np.zeros(d - i)
        e0[0] = 1.0
        if col[0] < 0.9:
            # Aligning onto +e_i is well conditioned here.
            target = e0
        else:
            resid = col - e0
            if float(resid @ resid) <= EPS_V:
                continue
            target = -e0
        v = np.zeros(d)
        v[i:] = col - target
        vv = float(v @ v)
        if vv <= EPS_V:
            continue
        m[i:, i:] -= np.outer(v[i:], (2.0 / vv) * (v[i:] @ m[i:, i:]))
        vectors.append(v)
    for i in range(d):
        if m[i, i] < 0.0:
            e = np.zeros(d)
            e[i] = 1.0
            vectors.append(e)
    return ReflectionChain(d, vectors)


def random_orthogonal(d: int, rng: SeededRng) -> np.ndarray:
    """Haar-like orthogonal matrix: QR of a Gaussian with positive R diagonal."""
    if d < 1:
        raise ValueError("d must be >= 1")
    g = rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs[None, :]
