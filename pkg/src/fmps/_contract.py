"""Shared tensor-contraction helpers: transfer operators and MPO zippers.

Conventions: site tensors are stored left-canonically absorbed,
``A_k = lambda_k Gamma_k`` with axes (left bond, physical, right bond).
Transfer maps act right-to-left, ``E(X) = sum_s A[s] X A[s]^T``; with this
gauge the left fixed point is the identity and the right fixed point at
bond k is ``diag(lambda_k^2)``.  MPO cores have axes
(left bond, out, in, right bond).
"""

from __future__ import annotations

import numpy as np

from .imps import InfiniteMPS


def site_matrices(psi: InfiniteMPS) -> list[np.ndarray]:
    """Left-canonical site tensors lambda_k Gamma_k."""
    return [
        psi.tensors[k] * psi.spectra[k][:, None, None] for k in range(psi.cell_k)
    ]


def right_boundary(psi: InfiniteMPS, bond: int) -> np.ndarray:
    """Right fixed-point matrix diag(lambda_bond^2)."""
    lam = psi.spectra[bond % psi.cell_k]
    return np.diag(lam * lam)


def apply_site_transfer(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """E(X) = sum_s A[s] X A[s]^T, mapping bond k+1 matrices to bond k."""
    tmp = np.tensordot(a, x, axes=(2, 0))
    return np.tensordot(tmp, a, axes=([1, 2], [1, 2]))


def apply_op_site_transfer(a: np.ndarray, op: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Single-site transfer with an operator inserted between bra and ket."""
    tmp = np.tensordot(a, x, axes=(2, 0))          # (l, s, r')
    tmp = np.tensordot(op, tmp, axes=(1, 1))       # (s', l, r')
    return np.tensordot(tmp, a, axes=([0, 2], [1, 2]))  # (l, l')


def dense_site_transfer(a: np.ndarray) -> np.ndarray:
    """Dense matrix of the site transfer map on row-major vectorized X."""
    chi_l, _, chi_r = a.shape
    return np.einsum("asb,csd->acbd", a, a, optimize=True).reshape(
        chi_l * chi_l, chi_r * chi_r
    )


def dense_mixed_site_transfer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense mixed transfer factor with ket from ``a`` and bra from ``b``."""
    if a.shape[1] != b.shape[1]:
        raise ValueError("mixed transfer needs matching physical dimensions")
    return np.einsum("asb,csd->acbd", a, b, optimize=True).reshape(
        a.shape[0] * b.shape[0], a.shape[2] * b.shape[2]
    )


def cell_transfer_dense(a_list: list[np.ndarray], start: int = 0) -> np.ndarray:
    """Dense one-cell transfer matrix starting at site ``start``."""
    k_cell = len(a_list)
    mat = dense_site_transfer(a_list[start % k_cell])
    for j in range(1, k_cell):
        mat = mat @ dense_site_transfer(a_list[(start + j) % k_cell])
    return mat


def apply_cell_transfer(
    a_list: list[np.ndarray], x: np.ndarray, start: int = 0
) -> np.ndarray:
    """One-cell transfer map applied to a single matrix (matrix-free path)."""
    k_cell = len(a_list)
    for j in reversed(range(k_cell)):
        x = apply_site_transfer(a_list[(start + j) % k_cell], x)
    return x


def mpo_from_dense(
    mat: np.ndarray, arity: int, dim_d: int, rel_tol: float = 1e-13
) -> list[np.ndarray]:
    """Exact MPO factorization of a dense operator over ``arity`` sites.

    Splits by successive SVDs, dropping singular values below
    ``rel_tol`` relative to the largest of each split; for the
    oscillator-chain blocks the ranks collapse to <= 4.
    """
    if mat.shape != (dim_d**arity, dim_d**arity):
        raise ValueError("operator shape does not match arity and dim_d")
    ten = mat.reshape([dim_d] * (2 * arity))
    perm = [axis for j in range(arity) for axis in (j, arity + j)]
    ten = ten.transpose(perm)
    cores = []
    left = 1
    rest = ten.reshape(left * dim_d * dim_d, -1)
    for _ in range(arity - 1):
        u, s, vt = np.linalg.svd(rest, full_matrices=False)
        keep = max(1, int(np.count_nonzero(s > rel_tol * s[0])))
        cores.append(u[:, :keep].reshape(left, dim_d, dim_d, keep))
        left = keep
        rest = (s[:keep, None] * vt[:keep]).reshape(left * dim_d * dim_d, -1)
    cores.append(rest.reshape(left, dim_d, dim_d, 1))
    return cores


def window_env(
    a_sites: list[np.ndarray], cores: list[np.ndarray], x: np.ndarray
) -> np.ndarray:
    """Zip an MPO window against ket/bra site tensors, right to left.

    ``a_sites`` lists the site tensors under the window (length = arity);
    ``x`` is the environment matrix at the window's right edge.  Returns
    the environment matrix at the left edge:  F(X).
    """
    env = x[None, :, :]  # (mpo bond, ket bond, bra bond)
    for a, core in zip(reversed(a_sites), reversed(cores)):
        env = np.einsum(
            "lsr,eusf,puq,frq->elp", a, core, a, env, optimize=True
        )
    if env.shape[0] != 1:
        raise ValueError("window did not close the MPO bond")
    return env[0]


def pair_expectation(
    a_list: list[np.ndarray],
    right_env: np.ndarray,
    w1: int,
    cores1: list[np.ndarray],
    w2: int,
    cores2: list[np.ndarray],
) -> float:
    """<h_{w1} h_{w2}> for two (possibly overlapping) operator windows.

    ``w2 >= w1``; ``right_env`` is the boundary matrix at the right edge of
    the union window.  The first operator sits on the bra side of the
    second, matching <psi| h1 h2 |psi>.
    """
    if w2 < w1:
        raise ValueError("windows must be ordered, w2 >= w1")
    k_cell = len(a_list)
    a1, a2 = len(cores1), len(cores2)
    end = max(w1 + a1, w2 + a2)
    dim_d = a_list[0].shape[1]
    ident = np.eye(dim_d).reshape(1, dim_d, dim_d, 1)
    env = right_env[None, None, :, :]  # (mpo1 bond, mpo2 bond, ket, bra)
    for t in reversed(range(w1, end)):
        a = a_list[t % k_cell]
        g1 = cores1[t - w1] if w1 <= t < w1 + a1 else ident
        g2 = cores2[t - w2] if w2 <= t < w2 + a2 else ident
        # ket -> mpo2 (in s, out u) -> mpo1 (in u, out y) -> bra
        env = np.einsum(
            "lsr,fusg,eyuh,pyq,hgrq->eflp", a, g2, g1, a, env, optimize=True
        )
    if env.shape[0] != 1 or env.shape[1] != 1:
        raise ValueError("pair window did not close the MPO bonds")
    return float(np.trace(env[0, 0]))
