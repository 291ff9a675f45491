"""Right-hand sides of the coupled wavefunction / fluid / density system.

The model couples a nonlinear Schrodinger wavefunction psi to an
incompressible, variable-density viscous flow (u, rho) through the coupling
operator

    C[psi] = 0.5 * (-i grad - u)^2 psi + mu |psi|^2 psi
           = -0.5 lap(psi) + i u.grad(psi) + 0.5 |u|^2 psi + mu |psi|^2 psi

(the expansion uses div(u) = 0).  The evolution equations are

    dt psi = -lam * C[psi] + (i/2) lap(psi) - i mu |psi|^2 psi
    dt rho + div(rho u) = 2 lam Re(conj(psi) C[psi])
    rho (dt u + u.grad u) + grad(ptilde) - nu lap(u)
        = -2 lam Im(grad(conj(psi)) C[psi]) - 2 lam u Re(conj(psi) C[psi])

with the pressure eliminated by Leray projection.  A conservative form of the
momentum source exists for cross-validation: it differs from the
non-conservative one by a pure gradient plus the mass-exchange drag term.

Every nonlinear product is truncated by the 2/3 rule, and initial data is
ingested band-limited, so fields stay inside the dealias ball for all time.
That choice makes the quadratic-form and source-equivalence identities below
hold to round-off on the discrete grid.
"""

from dataclasses import dataclass

import numpy as np

from .grid import Grid, require_finite
from .norms import inner_product
from .spectral import plan_for


@dataclass(frozen=True)
class Params:
    """Model constants.

    lam   -- relaxation / mutual-friction coefficient (>= 0; the physical
             model has lam > 0, the degenerate value exists for dispersive
             and reversal checks)
    mu    -- wavefunction self-interaction (>= 0)
    nu    -- kinematic viscosity (>= 0; same remark as lam)
    m, M  -- initial density bounds (0 < m <= M)
    eps   -- allowed density infimum (0 < eps < m); a run ends when the
             density touches this floor
    delta -- Sobolev index offset in (0, 1/2) used by the diagnostics norms
    gamma -- free constant in the logged growth functional (not fixed by the
             model; informational only)
    """

    lam: float
    mu: float
    nu: float
    m: float
    M: float
    eps: float
    delta: float = 0.25
    gamma: float = 1.0

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.mu >= 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if not self.nu >= 0:
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        if not 0 < self.m <= self.M:
            raise ValueError(f"density bounds must satisfy 0 < m <= M, got m={self.m}, M={self.M}")
        if not 0 < self.eps < self.m:
            raise ValueError(f"epsilon must lie in (0, m), got epsilon={self.eps}, m={self.m}")
        if not 0 < self.delta < 0.5:
            raise ValueError(f"delta must lie in (0, 0.5), got {self.delta}")

    @property
    def m_prime(self):
        """Upper density bound M + m - eps implied by the floor."""
        return self.M + self.m - self.eps


@dataclass
class State:
    """One trajectory point: time plus the three fields on a shared grid."""

    t: float
    psi: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    grid: Grid

    def validate(self):
        g = self.grid
        if not g.is_scalar(self.psi) or not np.iscomplexobj(self.psi):
            raise ValueError("psi must be a complex scalar field on the state grid")
        if not g.is_vector(self.u) or np.iscomplexobj(self.u):
            raise ValueError("u must be a real vector field on the state grid")
        if not g.is_scalar(self.rho) or np.iscomplexobj(self.rho):
            raise ValueError("rho must be a real scalar field on the state grid")
        require_finite(self.psi, "psi")
        require_finite(self.u, "u")
        require_finite(self.rho, "rho")
        return self

    def copy(self):
        return State(self.t, self.psi.copy(), self.u.copy(), self.rho.copy(), self.grid)


class DensityFloorViolation(Exception):
    """The density dropped to the configured floor; carries the event data."""

    def __init__(self, time, location, value, floor):
        self.time = float(time)
        self.location = tuple(int(i) for i in location)
        self.value = float(value)
        self.floor = float(floor)
        super().__init__(
            f"density {value:.6g} fell below the floor {floor:.6g} "
            f"at t={time:.6g}, node {self.location}"
        )


class BlowUp(Exception):
    """Non-finite values appeared; carries the last valid time."""

    def __init__(self, last_valid_time, where):
        self.last_valid_time = float(last_valid_time)
        self.where = where
        super().__init__(f"non-finite values in {where}; last valid time t={last_valid_time:.6g}")


def coupling_term(state, params, plan=None):
    """Apply the coupling operator to the wavefunction.

    Returns -0.5 lap(psi) + i u.grad(psi) + 0.5 |u|^2 psi + mu |psi|^2 psi,
    each nonlinear product dealiased.  The associated quadratic form
    Re<psi, C[psi]> equals 0.5 ||(-i grad - u) psi||^2 + mu ||psi||_L4^4 and
    is nonnegative.
    """
    if plan is None:
        plan = plan_for(state.grid)
    psi, u = state.psi, state.u
    psi_hat = plan.fft(psi)
    grad_psi = np.stack([plan.ifft(1j * km * psi_hat, psi) for km in plan.k])
    lap_psi = plan.ifft(-plan.k2 * psi_hat, psi)
    nonlinear = (
        1j * np.sum(u * grad_psi, axis=0)
        + 0.5 * np.sum(u * u, axis=0) * psi
        + params.mu * (psi.real ** 2 + psi.imag ** 2) * psi
    )
    return -0.5 * lap_psi + plan.dealias(nonlinear)


def coupling_quadratic_form(state, params):
    """Re<psi, C[psi]>, evaluated from the coupling field."""
    return inner_product(state.grid, state.psi, coupling_term(state, params)).real


def schrodinger_rhs(state, params, coupling=None, plan=None):
    """dt psi = -lam C[psi] + (i/2) lap(psi) - i mu |psi|^2 psi (dealiased)."""
    if plan is None:
        plan = plan_for(state.grid)
    psi = state.psi
    if coupling is None:
        coupling = coupling_term(state, params, plan)
    cubic = plan.dealias((psi.real ** 2 + psi.imag ** 2) * psi)
    return -params.lam * coupling + 0.5j * plan.laplacian(psi) - 1j * params.mu * cubic


def mass_exchange(state, params, coupling=None):
    """Source of the density equation, 2 lam Re(conj(psi) C[psi]).

    Its integral is 2 lam Re<psi, C[psi]> >= 0 and balances the decay of
    the wavefunction mass exactly, so total mass int(rho) + int(|psi|^2) is
    conserved by the coupled dynamics.
    """
    if coupling is None:
        coupling = coupling_term(state, params)
    return 2.0 * params.lam * (np.conj(state.psi) * coupling).real


def _wave_momentum_flux(state, params, coupling, plan=None):
    """Shared vector term -2 lam Im(grad(conj(psi)) C[psi]), dealiased."""
    if plan is None:
        plan = plan_for(state.grid)
    grad_psi = plan.gradient(state.psi)
    comps = [plan.dealias((np.conj(g) * coupling).imag) for g in grad_psi]
    return -2.0 * params.lam * np.stack(comps)


def momentum_source(state, params, coupling=None, plan=None):
    """Non-conservative momentum source; drives the integrator.

    -2 lam Im(grad(conj(psi)) C[psi]) - 2 lam u Re(conj(psi) C[psi]).
    """
    if plan is None:
        plan = plan_for(state.grid)
    if coupling is None:
        coupling = coupling_term(state, params, plan)
    flux = _wave_momentum_flux(state, params, coupling, plan)
    drag_scalar = (np.conj(state.psi) * coupling).real
    drag = np.stack([plan.dealias(state.u[i] * drag_scalar) for i in range(state.grid.d)])
    return flux - 2.0 * params.lam * drag


def momentum_source_conservative(state, params, coupling=None, plan=None):
    """Conservative momentum source; kept for cross-validation only.

    -2 lam Im(grad(conj(psi)) C[psi]) + lam grad(Im(conj(psi) C[psi]))
    + (mu/2) grad(|psi|^4).  The difference from the non-conservative form is
    a pure gradient plus the mass-exchange drag 2 lam u Re(conj(psi) C[psi]),
    so it vanishes under Leray projection once the drag is subtracted.
    """
    if plan is None:
        plan = plan_for(state.grid)
    psi = state.psi
    if coupling is None:
        coupling = coupling_term(state, params, plan)
    flux = _wave_momentum_flux(state, params, coupling, plan)
    imag_pair = plan.dealias((np.conj(psi) * coupling).imag)
    quartic = plan.dealias((psi.real ** 2 + psi.imag ** 2) ** 2)
    return flux + params.lam * plan.gradient(imag_pair) + 0.5 * params.mu * plan.gradient(quartic)


def density_floor_check(state, params, time=None):
    """Raise DensityFloorViolation if rho dips to the floor anywhere."""
    rho = state.rho
    idx_flat = int(np.argmin(rho))
    value = float(rho.flat[idx_flat])
    if value < params.eps:
        loc = np.unravel_index(idx_flat, rho.shape)
        raise DensityFloorViolation(state.t if time is None else time, loc, value, params.eps)


def velocity_rhs(state, params, coupling=None, plan=None):
    """Pre-projection acceleration of the non-conservative momentum equation.

    Returns -u.grad(u) + (nu lap(u) + momentum source) / rho.  The Leray
    projection is the integrator's job, not done here.  Requires rho >= eps
    pointwise.
    """
    if plan is None:
        plan = plan_for(state.grid)
    density_floor_check(state, params)
    if coupling is None:
        coupling = coupling_term(state, params, plan)
    u, rho = state.u, state.rho
    grad_u = [plan.gradient(u[i]) for i in range(state.grid.d)]
    advect = np.stack([
        plan.dealias(sum(u[j] * grad_u[i][j] for j in range(state.grid.d)))
        for i in range(state.grid.d)
    ])
    source = momentum_source(state, params, coupling, plan)
    visc = params.nu * plan.laplacian(u)
    accel = -advect + np.stack([plan.dealias((visc[i] + source[i]) / rho) for i in range(state.grid.d)])
    return accel
