"""Input-dependent Householder reflection layers.

The core object is the map f(x) = H(Wx) x, a single reflection whose axis
is computed from the input.  One such layer can represent the action of
any orthogonal matrix (via W = I - U), has a closed-form Jacobian and a
rank-one-update log-determinant, and is provably invertible under a
spectral condition on W, with inverses computed by Newton's method.
"""

from .householder import (
    DegenerateReflectionError,
    ReflectionChain,
    align,
    chain_apply,
    chain_apply_batch,
    decompose_orthogonal,
    random_orthogonal,
    reflect,
)
from .invertible import (
    CheckResult,
    InvertibleWeights,
    NewtonConfig,
    NewtonResult,
    SingularJacobianError,
    build_weights,
    check_invertibility_condition,
    invertibility_certificate,
    newton_inverse,
    roundtrip_check,
)
from .linalg import (
    EigenBounds,
    NotSymmetricError,
    SingularMatrixError,
    lu_det_and_solve,
    matvec,
    power_iteration_sigma_max,
    sym_eig_bounds,
)
from .reflection import (
    AuxReflection,
    DegenerateInputError,
    JacobianParts,
    SingularAError,
)
from .rng import SeededRng

__version__ = "0.1.0"

__all__ = [
    "AuxReflection",
    "CheckResult",
    "DegenerateInputError",
    "DegenerateReflectionError",
    "EigenBounds",
    "InvertibleWeights",
    "JacobianParts",
    "NewtonConfig",
    "NewtonResult",
    "NotSymmetricError",
    "ReflectionChain",
    "SeededRng",
    "SingularAError",
    "SingularJacobianError",
    "SingularMatrixError",
    "align",
    "build_weights",
    "chain_apply",
    "chain_apply_batch",
    "check_invertibility_condition",
    "decompose_orthogonal",
    "invertibility_certificate",
    "lu_det_and_solve",
    "matvec",
    "newton_inverse",
    "power_iteration_sigma_max",
    "random_orthogonal",
    "reflect",
    "roundtrip_check",
    "sym_eig_bounds",
]
