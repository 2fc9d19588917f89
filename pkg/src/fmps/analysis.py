"""Scaling-law fits, central charge, and physical-region classification.

At the critical coupling the correlation length grows algebraically with
the bond dimension (xi ~ chi^kappa) and the entanglement entropy
logarithmically (S ~ eta ln chi); both fits are unweighted ordinary least
squares in log space, and the central charge follows as c = 6 eta / kappa.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Literal, Sequence

import numpy as np

from .errors import BracketError, InsufficientDataError

if TYPE_CHECKING:
    from .evolve import GroundStateResult

DEFAULT_CHI_MIN = 4
DEFAULT_RESIDUAL_THRESHOLD = 10.0


@dataclass
class ScalingDataset:
    """(chi, entropy, correlation length) records at fixed couplings."""

    records: list[tuple[int, float, float]]
    gamma: float
    gamma3: float = 0.0
    dim_d: int = 0

    def __post_init__(self):
        chis = [r[0] for r in self.records]
        if any(b <= a for a, b in zip(chis, chis[1:])):
            raise ValueError("chi values must be strictly increasing")


@dataclass
class ScalingFit:
    kappa: float
    kappa_stderr: float
    eta: float
    eta_stderr: float
    central_charge: float
    chi_max_used: int
    r_squared_xi: float
    r_squared_entropy: float


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """Least squares y = a + b x: (slope, intercept, slope stderr, r^2)."""
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise InsufficientDataError("degenerate abscissa for fit")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    stderr = float(np.sqrt(ss_res / (n - 2) / sxx)) if n > 2 else 0.0
    return slope, intercept, stderr, r2


def fit_power_law(
    points: Sequence[tuple[float, float]]
) -> tuple[float, float, float]:
    """Fit y = amplitude * x^exponent; returns (exponent, amplitude, r^2)."""
    if len(points) < 3:
        raise InsufficientDataError("power-law fit needs >= 3 points")
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs strictly positive values")
    slope, intercept, _, r2 = _ols(np.log(x), np.log(y))
    return slope, float(np.exp(intercept)), r2


def fit_log_law(
    points: Sequence[tuple[float, float]]
) -> tuple[float, float, float]:
    """Fit s = eta * ln(chi) + offset; returns (eta, offset, r^2)."""
    if len(points) < 3:
        raise InsufficientDataError("log-law fit needs >= 3 points")
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    if np.any(x <= 0):
        raise ValueError("log-law fit needs positive chi")
    slope, intercept, _, r2 = _ols(np.log(x), y)
    return slope, intercept, r2


def central_charge(eta: float, kappa: float) -> float:
    """c = 6 eta / kappa."""
    if kappa == 0.0:
        raise ZeroDivisionError("kappa must be nonzero")
    return 6.0 * eta / kappa


def fit_scaling(dataset: ScalingDataset, chi_min: int = DEFAULT_CHI_MIN) -> ScalingFit:
    """Both scaling fits on records with chi >= chi_min, plus the charge."""
    recs = [r for r in dataset.records if r[0] >= chi_min]
    if len(recs) < 3:
        raise InsufficientDataError("need >= 3 records above chi_min")
    xi_pts = [(r[0], r[2]) for r in recs]
    s_pts = [(r[0], r[1]) for r in recs]
    kappa, _, r2_xi = fit_power_law(xi_pts)
    x = np.log(np.array([p[0] for p in xi_pts], dtype=float))
    _, _, kappa_err, _ = _ols(x, np.log(np.array([p[1] for p in xi_pts])))
    eta, _, r2_s = fit_log_law(s_pts)
    _, _, eta_err, _ = _ols(x, np.array([p[1] for p in s_pts], dtype=float))
    return ScalingFit(
        kappa=kappa,
        kappa_stderr=kappa_err,
        eta=eta,
        eta_stderr=eta_err,
        central_charge=central_charge(eta, kappa),
        chi_max_used=max(r[0] for r in recs),
        r_squared_xi=r2_xi,
        r_squared_entropy=r2_s,
    )


def central_charge_convergence(
    dataset: ScalingDataset, chi_min: int = DEFAULT_CHI_MIN
) -> list[tuple[int, float]]:
    """c fitted on every prefix chi <= chi_max with at least 3 points."""
    recs = [r for r in dataset.records if r[0] >= chi_min]
    if len(recs) < 4:
        raise InsufficientDataError("need >= 4 chi values for a convergence scan")
    out = []
    for stop in range(3, len(recs) + 1):
        sub = ScalingDataset(
            records=recs[:stop],
            gamma=dataset.gamma,
            gamma3=dataset.gamma3,
            dim_d=dataset.dim_d,
        )
        fit = fit_scaling(sub, chi_min=chi_min)
        out.append((fit.chi_max_used, fit.central_charge))
    return out


def classify_physical(
    result: "GroundStateResult",
    residual: float,
    threshold: float = DEFAULT_RESIDUAL_THRESHOLD,
) -> Literal["physical", "non_physical"]:
    """Label a run by its divergence flag and Schrodinger residual."""
    if residual < 0:
        raise ValueError("residual must be nonnegative")
    if result.diverged or residual > threshold:
        return "non_physical"
    return "physical"


def fit_boundary(
    points: Sequence[tuple[float, float]]
) -> tuple[float, float, float]:
    """Fit the dividing boundary gamma3_c = a * (0.5 - gamma)^b.

    Returns (a, b, r^2) from least squares on (ln(0.5-gamma), ln gamma3_c).
    """
    if len(points) < 3:
        raise InsufficientDataError("boundary fit needs >= 3 points")
    g = np.array([p[0] for p in points], dtype=float)
    g3 = np.array([p[1] for p in points], dtype=float)
    if np.any(g >= 0.5):
        raise ValueError("boundary fit needs gamma < 0.5")
    if np.any(g3 <= 0):
        raise ValueError("boundary fit needs positive gamma3 values")
    slope, intercept, _, r2 = _ols(np.log(0.5 - g), np.log(g3))
    return float(np.exp(intercept)), slope, r2


@dataclass
class BoundarySearch:
    """Configuration for locating the physical/non-physical dividing point.

    ``classify`` maps (gamma, gamma3) to a label (normally by running the
    evolution and applying classify_physical); ``entropy`` maps the same
    arguments to the converged entanglement entropy and is only needed by
    the EE-peak method.
    """

    classify: Callable[[float, float], str] | None = None
    entropy: Callable[[float, float], float] | None = None
    gamma3_lo: float = 0.0
    gamma3_hi: float = 0.12
    xtol: float = 2.5e-3
    method: Literal["bisect", "ee_peak"] = "bisect"
    ee_grid: tuple[float, ...] = field(default_factory=tuple)


def find_boundary(gamma: float, search: BoundarySearch) -> float:
    """Dividing gamma3 at fixed gamma, to the configured tolerance."""
    if gamma >= 0.5:
        raise ValueError("boundary search needs gamma < 0.5")
    if search.method == "bisect":
        if search.classify is None:
            raise ValueError("bisection needs a classify callable")
        lo, hi = search.gamma3_lo, search.gamma3_hi
        c_lo = search.classify(gamma, lo)
        c_hi = search.classify(gamma, hi)
        if c_lo == c_hi:
            raise BracketError(
                f"no dividing point bracketed in [{lo}, {hi}] (both {c_lo})"
            )
        while hi - lo > search.xtol:
            mid = 0.5 * (lo + hi)
            if search.classify(gamma, mid) == c_lo:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)
    if search.method == "ee_peak":
        if search.entropy is None or len(search.ee_grid) < 3:
            raise ValueError("EE-peak search needs an entropy callable and a grid")
        grid = np.array(search.ee_grid, dtype=float)
        values = np.array([search.entropy(gamma, g3) for g3 in grid])
        imax = int(np.argmax(values))
        if imax == 0 or imax == len(grid) - 1:
            raise BracketError("entropy peak sits on the grid edge")
        x0, x1, x2 = grid[imax - 1 : imax + 2]
        y0, y1, y2 = values[imax - 1 : imax + 2]
        denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
        a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
        b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
        if a >= 0:
            raise BracketError("entropy grid is not concave around the peak")
        return float(-b / (2 * a))
    raise ValueError(f"unknown boundary method {search.method!r}")
