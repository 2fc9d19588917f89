"""Independent numerical oracles used to freeze expected test values.

Everything here deliberately avoids the package's ladder-matrix formulas:
basis functions come from scipy's Hermite polynomials, derivatives from
finite differences, integrals from Gauss quadrature, and chain energies
from the analytic normal-mode sum.
"""

import numpy as np
from scipy.special import eval_hermite, gammaln


def hermite_phi(s: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal oscillator eigenfunction phi_s(x) via scipy Hermite values."""
    log_norm = -0.5 * (s * np.log(2.0) + gammaln(s + 1) + 0.5 * np.log(np.pi))
    return np.exp(log_norm - 0.5 * x * x) * eval_hermite(s, x)


def x_element_quadrature(s_row: int, s_col: int, n_nodes: int = 80) -> float:
    """<phi_row | x | phi_col> by Gauss-Hermite quadrature (exact for these)."""
    nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
    # strip the e^{-x^2} factor carried by the weight
    vals = hermite_phi(s_row, nodes) * nodes * hermite_phi(s_col, nodes)
    return float(np.sum(weights * vals * np.exp(nodes * nodes)))


def _phi_derivative(s: int, x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Five-point-stencil derivative of phi_s."""
    return (
        -hermite_phi(s, x + 2 * h)
        + 8 * hermite_phi(s, x + h)
        - 8 * hermite_phi(s, x - h)
        + hermite_phi(s, x - 2 * h)
    ) / (12 * h)


def deriv_element_quadrature(s_row: int, s_col: int, n_nodes: int = 600) -> float:
    """<phi_row | d/dx | phi_col> by finite differences + Gauss-Legendre."""
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    lo, hi = -10.0, 10.0
    x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    w = 0.5 * (hi - lo) * weights
    return float(np.sum(w * hermite_phi(s_row, x) * _phi_derivative(s_col, x)))


def normal_mode_energy(gamma: float, n_sites: int) -> float:
    """Exact total ground energy of the open chain of coupled oscillators."""
    n = np.arange(1, n_sites + 1, dtype=float)
    return 0.5 * float(np.sum(np.sqrt(1.0 + 2.0 * gamma * np.cos(n * np.pi / (n_sites + 1)))))


def xx_correlation_quadrature(gamma: float, separation: int) -> float:
    """<x_0 x_r> of the infinite two-body chain from its normal modes."""
    from scipy.integrate import quad

    val, _ = quad(
        lambda k: np.cos(separation * k) / (2.0 * np.sqrt(1.0 + 2.0 * gamma * np.cos(k))),
        0.0,
        np.pi,
        epsabs=1e-13,
        limit=200,
    )
    return val / np.pi


def chain_hamiltonian(x_mat: np.ndarray, p_mat: np.ndarray, n_sites: int, gamma: float,
                      gamma3: float = 0.0) -> np.ndarray:
    """Dense open-chain Hamiltonian assembled by explicit Kronecker sums."""
    d = x_mat.shape[0]
    h1 = 0.5 * (x_mat @ x_mat - p_mat @ p_mat)
    dim = d**n_sites

    def embed(op: np.ndarray, site: int, width: int) -> np.ndarray:
        left = np.eye(d**site)
        right = np.eye(d ** (n_sites - site - width))
        return np.kron(left, np.kron(op, right))

    ham = np.zeros((dim, dim))
    for n in range(n_sites):
        ham += embed(h1, n, 1)
    xx = np.kron(x_mat, x_mat)
    for n in range(n_sites - 1):
        ham += gamma * embed(xx, n, 2)
    if gamma3:
        xxx = np.kron(x_mat, np.kron(x_mat, x_mat))
        for n in range(n_sites - 2):
            ham += gamma3 * embed(xxx, n, 3)
    return ham
