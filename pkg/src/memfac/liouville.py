"""Liouville-space algebra: vectorization, superoperators, composite spaces.

Conventions used throughout the package
---------------------------------------
- Vectorization is column-major: a D x D matrix M maps to a vector of
  length D^2 with ``vec(M)[i + D*j] = M[i, j]`` (columns stacked).  Under
  this convention ``vec(A @ rho @ B) = kron(B.T, A) @ vec(rho)``.
- The elementary operator basis ``|i><j|`` is ordered by the same index,
  ``k = i + D*j``, so vectorizing basis element k gives the k-th unit
  coordinate vector.
- Composite Hilbert spaces are ordered system (x) environment with the
  system index varying slowest: ``kron(sys_op, env_op)``.
- The trace functional is the (real) vector ``vec(identity)``; applied as
  a row vector it returns the matrix trace of a vectorized operator.
"""

from dataclasses import dataclass

import numpy as np

from .constants import HBAR
from .errors import DimensionError, ValidationError

HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class LiouvilleSpace:
    """Tag identifying the space a superoperator or vector lives on.

    ``dim_env == 1`` tags the reduced system space; anything larger tags
    the composite (system (x) environment) space.
    """

    dim_system: int
    dim_env: int = 1

    @property
    def dim(self):
        """Hilbert-space dimension."""
        return self.dim_system * self.dim_env

    @property
    def size(self):
        """Liouville-space dimension (dim^2)."""
        return self.dim ** 2

    @property
    def is_composite(self):
        return self.dim_env > 1

    def system(self):
        """The reduced system space belonging to this composite space."""
        return LiouvilleSpace(self.dim_system)


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """A linear map on Liouville space: matrix plus the space it acts on."""

    matrix: np.ndarray
    space: LiouvilleSpace

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"superoperator matrix must be square, got {m.shape}")
        if m.shape[0] != self.space.size:
            raise DimensionError(
                f"superoperator of shape {m.shape} does not act on a space of "
                f"Liouville dimension {self.space.size}"
            )
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other):
        if isinstance(other, SuperOperator):
            if other.space != self.space:
                raise DimensionError(
                    f"cannot compose superoperators on {self.space} and {other.space}"
                )
            return SuperOperator(self.matrix @ other.matrix, self.space)
        return NotImplemented

    def apply(self, vec):
        """Apply to a vectorized operator (plain ndarray or LiouvilleVector)."""
        if isinstance(vec, LiouvilleVector):
            if vec.space != self.space:
                raise DimensionError(
                    f"superoperator on {self.space} applied to vector on {vec.space}"
                )
            return LiouvilleVector(self.matrix @ vec.vector, self.space)
        return self.matrix @ np.asarray(vec, dtype=complex)

    @classmethod
    def identity(cls, space):
        return cls(np.eye(space.size, dtype=complex), space)


@dataclass(frozen=True, eq=False)
class LiouvilleVector:
    """A vectorized operator tagged with its space."""

    vector: np.ndarray
    space: LiouvilleSpace

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=complex).reshape(-1)
        if v.size != self.space.size:
            raise DimensionError(
                f"vector of length {v.size} does not live on a space of "
                f"Liouville dimension {self.space.size}"
            )
        object.__setattr__(self, "vector", v)

    def matrix(self):
        return devectorize(self.vector)


class OperatorBasis:
    """Ordered elementary basis ``|i><j|`` of D x D matrices, k = i + D*j."""

    def __init__(self, dimension):
        if dimension < 1:
            raise ValidationError("basis dimension must be positive")
        self.dimension = int(dimension)

    def __len__(self):
        return self.dimension ** 2

    def index(self, i, j):
        return i + self.dimension * j

    def element(self, k):
        if not 0 <= k < len(self):
            raise DimensionError(f"basis index {k} out of range for D={self.dimension}")
        mat = np.zeros((self.dimension, self.dimension), dtype=complex)
        mat[k % self.dimension, k // self.dimension] = 1.0
        return mat

    def elements(self):
        return [self.element(k) for k in range(len(self))]


def vectorize(op):
    """Stack the columns of a square matrix into a vector (k = i + D*j)."""
    op = np.asarray(op, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise DimensionError(f"can only vectorize square matrices, got shape {op.shape}")
    return op.reshape(-1, order="F")


def devectorize(vec):
    """Inverse of :func:`vectorize`."""
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    dim = int(round(np.sqrt(vec.size)))
    if dim * dim != vec.size:
        raise DimensionError(f"vector of length {vec.size} is not a vectorized square matrix")
    return vec.reshape((dim, dim), order="F")


def trace_vector(dim):
    """The trace functional as a vector: trace(M) = trace_vector(D) @ vec(M)."""
    return vectorize(np.eye(dim)).real.astype(complex)


def sandwich_superop(a, b=None):
    """Superoperator for rho -> A @ rho @ B^dagger.

    With the column-major convention this is ``kron(conj(B), A)``.  ``b``
    defaults to ``a``.
    """
    a = np.asarray(a, dtype=complex)
    b = a if b is None else np.asarray(b, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"A must be square, got {a.shape}")
    if b.shape != a.shape:
        raise DimensionError(f"A and B must have equal shape, got {a.shape} and {b.shape}")
    return SuperOperator(np.kron(b.conj(), a), LiouvilleSpace(a.shape[0]))


def liouvillian(hamiltonian, lindblad_terms=(), hbar=HBAR, space=None):
    """GKSL generator as a superoperator.

    L = -i/hbar [H, .] + sum_k gamma_k (L_k . L_k^dag - 1/2 {L_k^dag L_k, .})

    Parameters
    ----------
    hamiltonian : ndarray
        Hermitian matrix (energy units, meV); hermiticity is checked to
        1e-12 absolute in the max norm.
    lindblad_terms : sequence of (rate, operator)
        Nonnegative rates in 1/ps with their jump operators.
    space : LiouvilleSpace, optional
        Space tag for the result; defaults to a system space of matching
        dimension.
    """
    h = np.asarray(hamiltonian, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionError(f"Hamiltonian must be square, got {h.shape}")
    if np.max(np.abs(h - h.conj().T)) > HERMITICITY_TOL:
        raise ValidationError(
            "Hamiltonian is not Hermitian within 1e-12 (max norm "
            f"{np.max(np.abs(h - h.conj().T)):.3e})"
        )
    dim = h.shape[0]
    if space is None:
        space = LiouvilleSpace(dim)
    if space.dim != dim:
        raise DimensionError(f"space {space} does not match Hamiltonian dimension {dim}")

    eye = np.eye(dim, dtype=complex)
    lv = -1j / hbar * (np.kron(eye, h) - np.kron(h.T, eye))
    for rate, op in lindblad_terms:
        if rate < 0:
            raise ValidationError(f"Lindblad rate must be nonnegative, got {rate}")
        op = np.asarray(op, dtype=complex)
        if op.shape != h.shape:
            raise DimensionError(
                f"jump operator of shape {op.shape} does not match Hamiltonian {h.shape}"
            )
        opdop = op.conj().T @ op
        lv += rate * (
            np.kron(op.conj(), op)
            - 0.5 * np.kron(eye, opdop)
            - 0.5 * np.kron(opdop.T, eye)
        )
    return SuperOperator(lv, space)


def embed_composite(sys_op, env_op):
    """Composite Hilbert-space operator with the system index slowest."""
    return np.kron(np.asarray(sys_op, dtype=complex), np.asarray(env_op, dtype=complex))


def partial_trace_env(vec, space):
    """Trace out the environment of a composite Liouville vector.

    Accepts a plain ndarray together with its composite ``space``, or a
    tagged :class:`LiouvilleVector` (then ``space`` must match its tag).
    Returns the reduced system Liouville vector (plain ndarray in, plain
    ndarray out; tagged in, tagged out).
    """
    tagged = isinstance(vec, LiouvilleVector)
    if tagged:
        if vec.space != space:
            raise DimensionError(f"vector tagged {vec.space} does not match {space}")
        raw = vec.vector
    else:
        raw = np.asarray(vec, dtype=complex).reshape(-1)
    if raw.size != space.size:
        raise DimensionError(
            f"composite vector of length {raw.size} does not match space size {space.size}"
        )
    d, de = space.dim_system, space.dim_env
    full = devectorize(raw).reshape(d, de, d, de)
    reduced = vectorize(np.einsum("iaja->ij", full))
    if tagged:
        return LiouvilleVector(reduced, space.system())
    return reduced


def env_injection_matrix(rho_env, dim_system):
    """Matrix J with J @ vec(rho_S) = vec(rho_S (x) rho_env).

    Shape ((D*D_E)^2, D^2); the workhorse for starting composite
    propagation from an uncorrelated system (x) environment state.
    """
    rho_env = np.asarray(rho_env, dtype=complex)
    de = rho_env.shape[0]
    d = dim_system
    basis = OperatorBasis(d)
    cols = np.empty(((d * de) ** 2, d * d), dtype=complex)
    for k in range(d * d):
        cols[:, k] = vectorize(embed_composite(basis.element(k), rho_env))
    return cols


def env_trace_matrix(dim_system, dim_env):
    """Matrix T with T @ vec(R) = vec(Tr_env R) for composite R."""
    space = LiouvilleSpace(dim_system, dim_env)
    n = space.size
    t = np.empty((dim_system ** 2, n), dtype=complex)
    eye = np.eye(n, dtype=complex)
    for col in range(n):
        t[:, col] = partial_trace_env(eye[:, col], space)
    return t
