"""Local fidelity between two infinite MPS via the mixed transfer matrix.

The mixed transfer folds bra tensors of one state against ket tensors of
the other over a window of lcm(K, K') sites.  Because cyclic products
share their spectrum, relabeling either unit cell permutes the possible
registrations; the fidelity is therefore taken as the maximum over all
cyclic alignments, which makes it invariant under relabeling.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigs

from ._contract import dense_mixed_site_transfer, site_matrices
from .imps import InfiniteMPS

DENSE_DIM_LIMIT = 2304


@dataclass
class MixedTransferMatrix:
    """Mixed bra/ket transfer over one common window."""

    span_sites: int
    matrix: np.ndarray | LinearOperator
    dominant_eig: complex


def _mixed_dominant(
    a_ket: list[np.ndarray], a_bra: list[np.ndarray], span: int, offset: int
) -> tuple[complex, np.ndarray | LinearOperator]:
    ka, kb = len(a_ket), len(a_bra)
    dim = a_ket[0].shape[0] * a_bra[offset % kb].shape[0]
    if dim <= DENSE_DIM_LIMIT:
        mat = dense_mixed_site_transfer(a_ket[0], a_bra[offset % kb])
        for t in range(1, span):
            mat = mat @ dense_mixed_site_transfer(
                a_ket[t % ka], a_bra[(t + offset) % kb]
            )
        vals = np.linalg.eigvals(mat)
        return complex(vals[np.argmax(np.abs(vals))]), mat

    def matvec(v):
        chi_a = a_ket[0].shape[0]
        chi_b = a_bra[offset % kb].shape[0]
        x = v.reshape(chi_a, chi_b)
        for t in reversed(range(span)):
            ak = a_ket[t % ka]
            ab = a_bra[(t + offset) % kb]
            x = np.einsum("lsr,rq,psq->lp", ak, x, ab, optimize=True)
        return x.reshape(-1)

    op = LinearOperator((dim, dim), matvec=matvec, dtype=float)
    v0 = np.ones(dim)
    vals = eigs(op, k=1, which="LM", v0=v0, tol=1e-12, return_eigenvectors=False)
    return complex(vals[0]), op


def local_fidelity_detail(
    psi_a: InfiniteMPS, psi_b: InfiniteMPS
) -> tuple[float, MixedTransferMatrix, int]:
    """(F, mixed transfer at the best alignment, best alignment offset)."""
    if psi_a.dim_d != psi_b.dim_d:
        raise ValueError("states must share the physical dimension")
    span = math.lcm(psi_a.cell_k, psi_b.cell_k)
    a_ket = site_matrices(psi_a)
    a_bra = site_matrices(psi_b)
    best = None
    for offset in range(psi_b.cell_k):
        eig0, mat = _mixed_dominant(a_ket, a_bra, span, offset)
        f = abs(eig0) ** 2
        if best is None or f > best[0]:
            best = (f, eig0, mat, offset)
    f, eig0, mat, offset = best
    tm = MixedTransferMatrix(span_sites=span, matrix=mat, dominant_eig=eig0)
    return float(f), tm, offset


def local_fidelity(psi_a: InfiniteMPS, psi_b: InfiniteMPS) -> float:
    """Per-window overlap density F = |dominant mixed eigenvalue|^2.

    F = 1 for identical canonical states; the thermodynamic-limit global
    fidelity is F^(N / span).  A complex dominant eigenvalue signals a
    nontrivial relative gauge; its phase is available from
    ``local_fidelity_detail``.
    """
    f, _, _ = local_fidelity_detail(psi_a, psi_b)
    return f


def relative_gauge_phase(tm: MixedTransferMatrix) -> float:
    """Phase of the dominant mixed eigenvalue, in radians."""
    return cmath.phase(tm.dominant_eig)
