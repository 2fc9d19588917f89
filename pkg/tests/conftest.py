import numpy as np
import pytest

import fmps


@pytest.fixture(scope="session")
def small_ground_state():
    """Converged two-body ground state at desk scale (gamma=0.35, D=6, chi=6)."""
    ops = fmps.BasisOperators.build(6)
    h = fmps.build_local_hamiltonian(ops, 2, 0.35)
    cfg = fmps.EvolutionConfig(
        chi_max=6,
        tau_schedule=(0.1, 0.03, 0.01, 3e-3, 1e-3),
        max_steps_per_tau=6000,
        convergence_tol=1e-9,
    )
    res = fmps.run_ground_state(h, cfg, fmps.init_product_state(2, 6))
    assert res.converged and not res.diverged
    return {"ops": ops, "h": h, "cfg": cfg, "result": res, "gamma": 0.35}
