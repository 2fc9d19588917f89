"""Imaginary-time evolution (iTEBD) with SVD truncation.

Gates are swept over the unit cell in a fixed order: for two-site gates,
windows starting at even sites then odd sites (sequential for odd cells);
for three-site gates, windows grouped by start site mod 3 so that each
group is non-overlapping ([0, 3, ...], [1, 4, ...], [2, 5, ...]).  Each
Trotter step in the schedule runs until the largest change of any Schmidt
coefficient over one full sweep drops below max(convergence_tol, tau^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .basis import Gate, LocalHamiltonian, build_gate
from .errors import DegenerateStateError
from .imps import InfiniteMPS
from .observables import _energy_density_raw, residual_density_detail


@dataclass(frozen=True)
class EvolutionConfig:
    chi_max: int
    tau_schedule: tuple[float, ...] = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4)
    max_steps_per_tau: int = 20000
    convergence_tol: float = 1e-8
    svd_floor: float = 1e-12
    divergence_energy_floor: float = -10.0
    divergence_stage_drop: float = 1.0
    residual_halt_threshold: float | None = 50.0
    energy_check_every: int = 25
    log_every: int = 25
    canonicalize_final: bool = True
    canonical_tol: float = 1e-10
    stage_tol_scale: float = 1.0

    def __post_init__(self):
        if self.chi_max < 1:
            raise ValueError("chi_max must be >= 1")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if self.svd_floor <= 0:
            raise ValueError("svd_floor must be positive")
        taus = tuple(self.tau_schedule)
        if not taus or any(t <= 0 for t in taus):
            raise ValueError("tau_schedule must hold positive Trotter steps")
        if any(a <= b for a, b in zip(taus, taus[1:])):
            raise ValueError("tau_schedule must be strictly descending")


@dataclass(frozen=True)
class LogRow:
    step: int
    tau: float
    energy: float
    entropies: tuple[float, ...]
    spectrum_delta: float
    discarded_weight: float


@dataclass
class GroundStateResult:
    psi: InfiniteMPS
    energy_density: float
    steps_taken: int
    converged: bool
    diverged: bool
    final_spectrum_delta: float
    final_tau: float
    history: list[LogRow] = field(default_factory=list)


def _select_rank(s: np.ndarray, chi_max: int, floor: float) -> int:
    if s.size == 0 or not np.isfinite(s[0]) or s[0] <= 0.0:
        raise DegenerateStateError("all singular values vanished or overflowed")
    keep = int(np.count_nonzero(s > floor * s[0]))
    return max(1, min(chi_max, keep))


def _split_truncate(
    mat: np.ndarray, chi_max: int, floor: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Truncated SVD of a theta matrix: (U, normalized s, Vt, discarded weight).

    Strongly rectangular matrices take a Gram-matrix eigendecomposition on
    the short side (exact up to squared-conditioning on the smallest kept
    values, which sit far above the floor in practice); square-ish ones use
    LAPACK's divide-and-conquer SVD with a gesvd fallback.
    """
    m, n = mat.shape
    if 4 * m <= n:
        g = mat @ mat.T
        w, q = np.linalg.eigh(0.5 * (g + g.T))
        s_all = np.sqrt(np.clip(w[::-1], 0.0, None))
        k = _select_rank(s_all, chi_max, floor)
        u = q[:, ::-1][:, :k]
        s = s_all[:k]
        vt = (u.T @ mat) / s[:, None]
    elif 4 * n <= m:
        g = mat.T @ mat
        w, q = np.linalg.eigh(0.5 * (g + g.T))
        s_all = np.sqrt(np.clip(w[::-1], 0.0, None))
        k = _select_rank(s_all, chi_max, floor)
        v = q[:, ::-1][:, :k]
        s = s_all[:k]
        u = (mat @ v) / s[None, :]
        vt = v.T
    else:
        try:
            u, s_all, vt_all = np.linalg.svd(mat, full_matrices=False)
        except np.linalg.LinAlgError:
            u, s_all, vt_all = scipy.linalg.svd(
                mat, full_matrices=False, lapack_driver="gesvd"
            )
        k = _select_rank(s_all, chi_max, floor)
        u, s, vt = u[:, :k], s_all[:k], vt_all[:k]
    total = float(np.sum(s_all * s_all))
    kept = float(np.sum(s * s))
    discarded = max(0.0, 1.0 - kept / total) if total > 0 else 0.0
    return u, s / np.sqrt(kept), vt, discarded


def _apply_gate_to_theta(theta: np.ndarray, gate_mat: np.ndarray) -> np.ndarray:
    chi_l = theta.shape[0]
    chi_r = theta.shape[-1]
    mat = theta.reshape(chi_l, gate_mat.shape[0], chi_r)
    out = np.tensordot(gate_mat, mat, axes=(1, 1)).transpose(1, 0, 2)
    return out


def _update_two_site(
    tensors: list[np.ndarray],
    spectra: list[np.ndarray],
    w: int,
    gate_mat: np.ndarray,
    chi_max: int,
    floor: float,
) -> float:
    k_cell = len(tensors)
    l, m, r = w % k_cell, (w + 1) % k_cell, (w + 2) % k_cell
    lam_l, lam_m, lam_r = spectra[l], spectra[m], spectra[r]
    dim_d = tensors[l].shape[1]
    left = tensors[l] * lam_l[:, None, None] * lam_m[None, None, :]
    right = tensors[m] * lam_r[None, None, :]
    theta = np.tensordot(left, right, axes=(2, 0))
    theta = _apply_gate_to_theta(theta, gate_mat)
    chi_l, chi_r = len(lam_l), len(lam_r)
    u, s, vt, dw = _split_truncate(
        theta.reshape(chi_l * dim_d, dim_d * chi_r), chi_max, floor
    )
    k = len(s)
    tensors[l] = u.reshape(chi_l, dim_d, k) / lam_l[:, None, None]
    tensors[m] = vt.reshape(k, dim_d, chi_r) / lam_r[None, None, :]
    spectra[m] = s
    return dw


def _update_three_site(
    tensors: list[np.ndarray],
    spectra: list[np.ndarray],
    w: int,
    gate_mat: np.ndarray,
    chi_max: int,
    floor: float,
) -> float:
    k_cell = len(tensors)
    l, m, n, rr = (w % k_cell, (w + 1) % k_cell, (w + 2) % k_cell, (w + 3) % k_cell)
    lam_l = spectra[l].copy()
    lam_rr = spectra[rr].copy()
    dim_d = tensors[l].shape[1]
    theta = tensors[l] * spectra[l][:, None, None]
    theta = theta * spectra[m]
    theta = np.tensordot(theta, tensors[m], axes=(2, 0))
    theta = theta * spectra[n]
    theta = np.tensordot(theta, tensors[n], axes=(3, 0))
    theta = theta * lam_rr
    theta = _apply_gate_to_theta(theta, gate_mat)
    chi_l, chi_r = len(lam_l), len(lam_rr)
    u1, s1, vt1, dw1 = _split_truncate(
        theta.reshape(chi_l * dim_d, dim_d * dim_d * chi_r), chi_max, floor
    )
    k1 = len(s1)
    rest = (s1[:, None] * vt1).reshape(k1 * dim_d, dim_d * chi_r)
    u2, s2, vt2, dw2 = _split_truncate(rest, chi_max, floor)
    k2 = len(s2)
    tensors[l] = u1.reshape(chi_l, dim_d, k1) / lam_l[:, None, None]
    tensors[m] = u2.reshape(k1, dim_d, k2) / s1[:, None, None]
    tensors[n] = vt2.reshape(k2, dim_d, chi_r) / lam_rr[None, None, :]
    spectra[m] = s1
    spectra[n] = s2
    return max(dw1, dw2)


def sweep_order(cell_k: int, arity: int) -> list[int]:
    """Window start sites for one sweep, grouped into non-overlapping sets."""
    if arity == 2:
        if cell_k % 2 == 0:
            return list(range(0, cell_k, 2)) + list(range(1, cell_k, 2))
        return list(range(cell_k))
    if arity == 3:
        if cell_k % 3 == 0:
            return [w for r in range(3) for w in range(r, cell_k, 3)]
        return list(range(cell_k))
    raise ValueError(f"unsupported gate arity {arity}")


def apply_two_site_gate(
    psi: InfiniteMPS, gate: Gate, bond: int, cfg: EvolutionConfig
) -> InfiniteMPS:
    """Apply a two-site gate across ``bond``; updates the two adjacent
    tensors and the Schmidt spectrum on that bond."""
    if gate.arity != 2:
        raise ValueError("apply_two_site_gate needs an arity-2 gate")
    if gate.dim_d != psi.dim_d:
        raise ValueError("gate physical dimension does not match the state")
    if not 0 <= bond < psi.cell_k:
        raise ValueError(f"bond {bond} out of range")
    new = psi.copy()
    _update_two_site(
        new.tensors, new.spectra, (bond - 1) % psi.cell_k, gate.matrix,
        cfg.chi_max, cfg.svd_floor,
    )
    return new


def apply_three_site_gate(
    psi: InfiniteMPS, gate: Gate, start_bond: int, cfg: EvolutionConfig
) -> InfiniteMPS:
    """Apply a three-site gate to the window right of ``start_bond``;
    updates three tensors and the two interior spectra."""
    if gate.arity != 3:
        raise ValueError("apply_three_site_gate needs an arity-3 gate")
    if gate.dim_d != psi.dim_d:
        raise ValueError("gate physical dimension does not match the state")
    if not 0 <= start_bond < psi.cell_k:
        raise ValueError(f"start_bond {start_bond} out of range")
    new = psi.copy()
    _update_three_site(
        new.tensors, new.spectra, start_bond, gate.matrix,
        cfg.chi_max, cfg.svd_floor,
    )
    return new


def canonicalize(
    psi: InfiniteMPS,
    chi_max: int | None = None,
    svd_floor: float = 1e-12,
    tol: float = 1e-10,
    max_sweeps: int = 2000,
) -> InfiniteMPS:
    """Restore the canonical gauge by identity-gate re-SVD sweeps.

    Sweeping the tau -> 0 limit of the evolution leaves the physical state
    untouched (up to floor-level truncation) while driving the tensors to
    the canonical fixed point; the gauge error contracts roughly by the
    subleading cell-transfer eigenvalue per sweep.  Finite-tau iTEBD fixed
    points carry an O(tau) gauge error, so this runs after evolution to
    make Schmidt spectra and canonical diagnostics sharp.
    """
    from .imps import canonical_error  # local import keeps module deps one-way

    new = psi.copy()
    if chi_max is None:
        chi_max = max(new.chis)
    dim_d = new.dim_d
    ident = np.eye(dim_d * dim_d)
    order = sweep_order(new.cell_k, 2)
    for _ in range(max_sweeps):
        for w in order:
            _update_two_site(new.tensors, new.spectra, w, ident, chi_max, svd_floor)
        if canonical_error(new) < tol:
            break
    return new


def _spectra_delta(old: list[np.ndarray], new: list[np.ndarray]) -> float:
    delta = 0.0
    for a, b in zip(old, new):
        size = max(len(a), len(b))
        pa = np.zeros(size)
        pb = np.zeros(size)
        pa[: len(a)] = a
        pb[: len(b)] = b
        delta = max(delta, float(np.max(np.abs(pa - pb))))
    return delta


def _normalize_terms(
    h_terms: LocalHamiltonian | Sequence[LocalHamiltonian], cell_k: int
) -> list[LocalHamiltonian]:
    if isinstance(h_terms, LocalHamiltonian):
        terms = [h_terms] * cell_k
    else:
        terms = list(h_terms)
        if len(terms) == 1:
            terms = terms * cell_k
    if len(terms) != cell_k:
        raise ValueError("need one Hamiltonian block per window (or a single one)")
    arity = terms[0].arity
    if any(t.arity != arity for t in terms):
        raise ValueError("all window blocks must share one arity")
    return terms


def run_ground_state(
    h_terms: LocalHamiltonian | Sequence[LocalHamiltonian],
    cfg: EvolutionConfig,
    init: InfiniteMPS,
    on_log: Callable[[LogRow], None] | None = None,
    on_checkpoint: Callable[[InfiniteMPS, int], None] | None = None,
    checkpoint_every: int = 0,
) -> GroundStateResult:
    """Project onto the ground state by sweeping gates over the unit cell.

    Runs every Trotter step of the schedule in turn, rebuilding the gates
    and sweeping until the spectra stop moving.  Declares divergence (the
    non-physical region) on runaway energies, overflow, or a large
    Schrodinger-equation residual at a stage boundary.
    """
    terms = _normalize_terms(h_terms, init.cell_k)
    arity = terms[0].arity
    if terms[0].dim_d != init.dim_d:
        raise ValueError("Hamiltonian and state physical dimensions differ")
    psi = init.copy()
    order = sweep_order(psi.cell_k, arity)
    update = _update_two_site if arity == 2 else _update_three_site
    history: list[LogRow] = []
    step = 0
    delta = float("inf")
    diverged = False
    stage_converged = False
    prev_stage_energy: float | None = None

    for tau in cfg.tau_schedule:
        gate_cache: dict[int, np.ndarray] = {}
        gate_mats = []
        for t in terms:
            key = id(t)
            if key not in gate_cache:
                gate_cache[key] = build_gate(t, tau).matrix
            gate_mats.append(gate_cache[key])
        stage_tol = max(cfg.convergence_tol, cfg.stage_tol_scale * tau * tau)
        stage_converged = False
        for _ in range(cfg.max_steps_per_tau):
            old_spectra = [s.copy() for s in psi.spectra]
            max_dw = 0.0
            try:
                for w in order:
                    dw = update(
                        psi.tensors, psi.spectra, w, gate_mats[w],
                        cfg.chi_max, cfg.svd_floor,
                    )
                    max_dw = max(max_dw, dw)
            except (DegenerateStateError, np.linalg.LinAlgError):
                diverged = True
                break
            step += 1
            delta = _spectra_delta(old_spectra, psi.spectra)
            check_now = (
                step % cfg.energy_check_every == 0 or delta < stage_tol
            )
            if check_now:
                energy = _energy_density_raw(psi, terms)
                if not np.isfinite(energy) or energy < cfg.divergence_energy_floor:
                    diverged = True
                    break
            if step % cfg.log_every == 0 or delta < stage_tol:
                row = LogRow(
                    step=step,
                    tau=tau,
                    energy=_energy_density_raw(psi, terms),
                    entropies=_safe_entropies(psi),
                    spectrum_delta=delta,
                    discarded_weight=max_dw,
                )
                history.append(row)
                if on_log is not None:
                    on_log(row)
            if checkpoint_every and on_checkpoint and step % checkpoint_every == 0:
                on_checkpoint(psi, step)
            if delta < stage_tol:
                stage_converged = True
                break
        if diverged:
            break
        stage_energy = _energy_density_raw(psi, terms)
        if not np.isfinite(stage_energy) or stage_energy < cfg.divergence_energy_floor:
            diverged = True
            break
        if (
            prev_stage_energy is not None
            and stage_energy < prev_stage_energy - cfg.divergence_stage_drop
        ):
            diverged = True
            break
        prev_stage_energy = stage_energy
        if cfg.residual_halt_threshold is not None:
            try:
                res, _ = residual_density_detail(psi, terms, tail="none")
            except (np.linalg.LinAlgError, ValueError):
                res = None
            if res is not None and res > cfg.residual_halt_threshold:
                diverged = True
                break
    if cfg.canonicalize_final and not diverged:
        psi = canonicalize(
            psi, chi_max=cfg.chi_max, svd_floor=cfg.svd_floor, tol=cfg.canonical_tol
        )
    final_energy = _energy_density_raw(psi, terms)
    if not np.isfinite(final_energy):
        final_energy = float("nan")
        diverged = True
    return GroundStateResult(
        psi=psi,
        energy_density=float(final_energy),
        steps_taken=step,
        converged=bool(stage_converged and not diverged),
        diverged=bool(diverged),
        final_spectrum_delta=float(delta),
        final_tau=float(cfg.tau_schedule[-1]),
        history=history,
    )


def _safe_entropies(psi: InfiniteMPS) -> tuple[float, ...]:
    out = []
    for lam in psi.spectra:
        p = lam * lam
        tot = p.sum()
        if tot <= 0 or not np.isfinite(tot):
            out.append(float("nan"))
            continue
        p = p / tot
        nz = p[p > 0]
        out.append(float(-np.sum(nz * np.log(nz))))
    return tuple(out)
