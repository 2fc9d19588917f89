"""Translationally invariant infinite MPS in canonical (tensor + spectrum) form.

The state is stored as ``K`` third-order tensors and ``K`` Schmidt spectra:
``spectra[k]`` lives on the bond to the *left* of ``tensors[k]``, so tensor
``k`` has shape ``(chi_k, D, chi_{k+1 mod K})`` with ``chi_k ==
len(spectra[k])``.  Bond dimensions may differ per bond ("ragged" cells);
truncation keeps them at or below the configured maximum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StateNotCanonicalError


@dataclass
class InfiniteMPS:
    tensors: list[np.ndarray]
    spectra: list[np.ndarray]

    @property
    def cell_k(self) -> int:
        return len(self.tensors)

    @property
    def dim_d(self) -> int:
        return self.tensors[0].shape[1]

    @property
    def chis(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.spectra)

    def copy(self) -> "InfiniteMPS":
        return InfiniteMPS(
            tensors=[t.copy() for t in self.tensors],
            spectra=[s.copy() for s in self.spectra],
        )

    def validate(self) -> None:
        """Check shape bookkeeping between tensors and spectra."""
        k_cell = self.cell_k
        if len(self.spectra) != k_cell:
            raise ValueError("need one spectrum per tensor")
        for k, t in enumerate(self.tensors):
            if t.ndim != 3:
                raise ValueError(f"tensor {k} is not third-order")
            if t.shape[0] != len(self.spectra[k]):
                raise ValueError(f"tensor {k} left bond does not match its spectrum")
            if t.shape[2] != len(self.spectra[(k + 1) % k_cell]):
                raise ValueError(f"tensor {k} right bond does not match next spectrum")
            if t.shape[1] != self.dim_d:
                raise ValueError("all tensors must share one physical dimension")


@dataclass(frozen=True)
class EntanglementData:
    """Squared Schmidt spectrum and von Neumann entropy at one bond."""

    bond_index: int
    spectrum: np.ndarray
    entropy: float


def init_product_state(cell_k: int, dim_d: int) -> InfiniteMPS:
    """chi=1 MPS for the decoupled-oscillator vacuum (every site in level 0)."""
    if cell_k < 1:
        raise ValueError(f"cell_k must be >= 1, got {cell_k}")
    if dim_d < 2:
        raise ValueError(f"dim_d must be >= 2, got {dim_d}")
    tensors = []
    for _ in range(cell_k):
        t = np.zeros((1, dim_d, 1))
        t[0, 0, 0] = 1.0
        tensors.append(t)
    spectra = [np.ones(1) for _ in range(cell_k)]
    return InfiniteMPS(tensors=tensors, spectra=spectra)


def canonical_error(psi: InfiniteMPS) -> float:
    """Worst deviation of the left/right canonical conditions from the identity.

    For each site the left-absorbed tensor ``lambda_k Gamma_k`` contracted
    with itself over (left bond, physical) should give the identity, and the
    right-absorbed tensor ``Gamma_k lambda_{k+1}`` contracted over (physical,
    right bond) likewise.  Returns the maximum Frobenius-norm deviation.
    """
    k_cell = psi.cell_k
    worst = 0.0
    for k in range(k_cell):
        gam = psi.tensors[k]
        lam_l = psi.spectra[k]
        lam_r = psi.spectra[(k + 1) % k_cell]
        a = gam * lam_l[:, None, None]
        b = gam * lam_r[None, None, :]
        left = np.tensordot(a, a, axes=([0, 1], [0, 1]))
        right = np.tensordot(b, b, axes=([1, 2], [1, 2]))
        worst = max(
            worst,
            float(np.linalg.norm(left - np.eye(left.shape[0]))),
            float(np.linalg.norm(right - np.eye(right.shape[0]))),
        )
    return worst


def entanglement_entropy(psi: InfiniteMPS, bond: int) -> EntanglementData:
    """Entanglement data at one bond: p = lambda^2, S = -sum p ln p."""
    if not 0 <= bond < psi.cell_k:
        raise ValueError(f"bond {bond} out of range for cell of {psi.cell_k}")
    lam = psi.spectra[bond]
    norm = float(lam @ lam)
    if abs(norm - 1.0) > 1e-6:
        raise StateNotCanonicalError(
            f"spectrum at bond {bond} has squared norm {norm:.8f}, expected 1"
        )
    p = lam * lam / norm
    nz = p[p > 0.0]
    entropy = float(-np.sum(nz * np.log(nz)))
    return EntanglementData(bond_index=bond, spectrum=p, entropy=entropy)


def entropies(psi: InfiniteMPS) -> np.ndarray:
    """Entanglement entropy at every bond of the unit cell."""
    return np.array([entanglement_entropy(psi, b).entropy for b in range(psi.cell_k)])


def cyclic_shift(psi: InfiniteMPS, shift: int) -> InfiniteMPS:
    """Relabel the unit cell: new site k is old site k + shift."""
    k_cell = psi.cell_k
    shift %= k_cell
    return InfiniteMPS(
        tensors=[psi.tensors[(k + shift) % k_cell].copy() for k in range(k_cell)],
        spectra=[psi.spectra[(k + shift) % k_cell].copy() for k in range(k_cell)],
    )


def window_theta(psi: InfiniteMPS, start_site: int, n_sites: int) -> np.ndarray:
    """Spectra-absorbed wave-function block over ``n_sites`` adjacent sites.

    Returns an array of shape (chi_left, D, ..., D, chi_right) carrying the
    boundary spectra on both edges; for a canonical state its contraction
    with itself is the reduced density matrix of the window.
    """
    k_cell = psi.cell_k
    k0 = start_site % k_cell
    theta = psi.tensors[k0] * psi.spectra[k0][:, None, None]
    for j in range(1, n_sites):
        k = (start_site + j) % k_cell
        theta = theta * psi.spectra[k]  # broadcast over the trailing (bond) axis
        theta = np.tensordot(theta, psi.tensors[k], axes=(theta.ndim - 1, 0))
    return theta * psi.spectra[(start_site + n_sites) % k_cell]
