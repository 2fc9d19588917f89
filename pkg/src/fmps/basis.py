"""Operator matrices in the Hermite-Gaussian function basis.

The single-variable basis functions are the harmonic-oscillator
eigenfunctions ``phi_s(x) = (2^s s! sqrt(pi))^(-1/2) e^(-x^2/2) H_s(x)``.
Truncating the expansion at order ``D`` turns multiplication by ``x`` and
differentiation into ``D x D`` ladder matrices, from which local
Hamiltonian blocks and imaginary-time gates are assembled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def build_position_matrix(dim_d: int) -> np.ndarray:
    """Matrix of multiplication by x, truncated to the lowest ``dim_d`` levels.

    Symmetric, tridiagonal with zero diagonal: entries
    ``sqrt((s+1)/2)`` connect levels ``s`` and ``s+1``.
    """
    if dim_d < 2:
        raise ValueError(f"dim_d must be >= 2, got {dim_d}")
    off = np.sqrt(np.arange(1, dim_d) / 2.0)
    return np.diag(off, 1) + np.diag(off, -1)


def build_derivative_matrix(dim_d: int) -> np.ndarray:
    """Matrix of d/dx in the same truncated basis.

    Antisymmetric ladder form: ``+sqrt((s+1)/2)`` lowering from level
    ``s+1`` to ``s``, ``-sqrt((s+1)/2)`` raising from ``s`` to ``s+1``.
    """
    if dim_d < 2:
        raise ValueError(f"dim_d must be >= 2, got {dim_d}")
    off = np.sqrt(np.arange(1, dim_d) / 2.0)
    return np.diag(off, 1) - np.diag(off, -1)


@dataclass(frozen=True)
class BasisOperators:
    """Truncated x and d/dx matrices for one oscillator variable."""

    dim_d: int
    x_matrix: np.ndarray
    deriv_matrix: np.ndarray

    @classmethod
    def build(cls, dim_d: int) -> "BasisOperators":
        return cls(
            dim_d=dim_d,
            x_matrix=build_position_matrix(dim_d),
            deriv_matrix=build_derivative_matrix(dim_d),
        )


def single_site_hamiltonian(ops: BasisOperators) -> np.ndarray:
    """Harmonic term ``(x^2 - d^2/dx^2) / 2`` as a truncated-matrix square.

    Squares of the truncated D x D matrices, not exact matrix elements of
    x^2; the two conventions differ only in the top basis level.
    """
    x2 = ops.x_matrix @ ops.x_matrix
    d2 = ops.deriv_matrix @ ops.deriv_matrix
    return 0.5 * (x2 - d2)


@dataclass
class LocalHamiltonian:
    """Hamiltonian-density block acting on ``arity`` adjacent sites.

    Single-site and two-body contributions carry sharing factors so that
    summing the block over every window of an infinite chain reproduces
    the chain Hamiltonian exactly (1/arity per single-site term, and for
    three-site blocks 1/2 per adjacent pair; each three-body product
    fits in exactly one window and enters with factor 1).
    """

    arity: int
    matrix: np.ndarray
    gamma: float
    gamma3: float = 0.0
    omega: float = 1.0
    _eig: tuple[np.ndarray, np.ndarray] | None = field(
        default=None, repr=False, compare=False
    )

    @property
    def dim_d(self) -> int:
        return round(self.matrix.shape[0] ** (1.0 / self.arity))

    def eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached symmetric eigendecomposition (w, V) of the block."""
        if self._eig is None:
            w, v = np.linalg.eigh(self.matrix)
            self._eig = (w, v)
        return self._eig


def build_local_hamiltonian(
    ops: BasisOperators, arity: int, gamma: float, gamma3: float = 0.0
) -> LocalHamiltonian:
    """Assemble the two- or three-site Hamiltonian-density block."""
    if arity not in (2, 3):
        raise ValueError(f"arity must be 2 or 3, got {arity}")
    if arity == 2 and gamma3 != 0.0:
        raise ValueError("two-site blocks cannot carry a three-body coupling")
    d = ops.dim_d
    eye = np.eye(d)
    h1 = single_site_hamiltonian(ops)
    x = ops.x_matrix
    if arity == 2:
        mat = 0.5 * (np.kron(h1, eye) + np.kron(eye, h1)) + gamma * np.kron(x, x)
    else:
        mat = (
            np.kron(h1, np.kron(eye, eye))
            + np.kron(eye, np.kron(h1, eye))
            + np.kron(eye, np.kron(eye, h1))
        ) / 3.0
        mat += 0.5 * gamma * (
            np.kron(x, np.kron(x, eye)) + np.kron(eye, np.kron(x, x))
        )
        mat += gamma3 * np.kron(x, np.kron(x, x))
    mat = 0.5 * (mat + mat.T)
    return LocalHamiltonian(arity=arity, matrix=mat, gamma=gamma, gamma3=gamma3)


@dataclass(frozen=True)
class Gate:
    """Imaginary-time evolution operator exp(-tau * h) over 2 or 3 sites."""

    arity: int
    tau: float
    matrix: np.ndarray

    @property
    def dim_d(self) -> int:
        return round(self.matrix.shape[0] ** (1.0 / self.arity))


def build_gate(h: LocalHamiltonian, tau: float) -> Gate:
    """Exponential of the block via its symmetric eigendecomposition.

    Exact to machine precision (no series truncation), which keeps the
    semigroup property Gate(a) @ Gate(b) == Gate(a+b) tight.
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    asym = np.max(np.abs(h.matrix - h.matrix.T))
    if asym > 1e-10:
        raise ValueError(f"Hamiltonian block not symmetric (max asymmetry {asym:.3e})")
    if tau == 0.0:
        return Gate(arity=h.arity, tau=0.0, matrix=np.eye(h.matrix.shape[0]))
    w, v = h.eigensystem()
    mat = (v * np.exp(-tau * w)) @ v.T
    mat = 0.5 * (mat + mat.T)
    return Gate(arity=h.arity, tau=tau, matrix=mat)
