"""Time stepping: Strang-split wavefunction step, IMEX projection step for the
fluid, explicit dealiased transport for the density.

One step of size dt is the composition

    wave half-step  ->  fluid + density full step  ->  wave half-step

* The wave substep treats the linear part exactly in Fourier space.  The
  relaxation contributes +lam/2 * lap(psi) (real diffusion) on top of the
  i/2 * lap(psi) dispersion, so the multiplier is exp(-(lam+i)/2 |k|^2 tau);
  the remaining advection/potential/cubic terms advance with an explicit
  midpoint stage.
* The fluid substep is a midpoint predictor-corrector with Crank-Nicolson
  viscosity at a constant reference density rho_bar = (m+M)/2 (the
  variable-density remainder is explicit), followed by Leray projection.
* The density advances with the same midpoint staging: spectral dealiased
  transport plus the mass-exchange source.

Each piece has local error O(dt^3), so the composition is second order.
A step that would drag the density below the configured floor raises
DensityFloorViolation; non-finite values raise BlowUp with the last valid
time.  run() converts both into a structured event on the trajectory.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .diagnostics import measure
from .model import (
    BlowUp,
    DensityFloorViolation,
    State,
    coupling_term,
    mass_exchange,
    momentum_source,
)
from .norms import lp_norm
from .spectral import plan_for

WAVE_SCHEMES = ("strang-rk2",)
FLUID_SCHEMES = ("imex-cn",)
DENSITY_SCHEMES = ("explicit-rk2",)


@dataclass(frozen=True)
class StepConfig:
    dt_init: float
    dt_min: float = 1e-9
    dt_max: float = 1.0
    cfl: float = 0.4
    adaptive: bool = False
    scheme_wave: str = "strang-rk2"
    scheme_fluid: str = "imex-cn"
    scheme_density: str = "explicit-rk2"
    dealias: bool = True

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError(
                f"need 0 < dt_min <= dt_init <= dt_max, got "
                f"{self.dt_min}, {self.dt_init}, {self.dt_max}"
            )
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.scheme_wave not in WAVE_SCHEMES:
            raise ValueError(f"unknown wave scheme {self.scheme_wave!r}")
        if self.scheme_fluid not in FLUID_SCHEMES:
            raise ValueError(f"unknown fluid scheme {self.scheme_fluid!r}")
        if self.scheme_density not in DENSITY_SCHEMES:
            raise ValueError(f"unknown density scheme {self.scheme_density!r}")


class CflViolation(Exception):
    """The CFL-admissible step fell below dt_min."""

    def __init__(self, proposal, dt_min, time):
        self.proposal = proposal
        self.dt_min = dt_min
        self.time = time
        super().__init__(
            f"CFL-admissible dt {proposal:.3e} below dt_min {dt_min:.3e} at t={time:.6g}"
        )


@dataclass
class PhysicsEvent:
    kind: str                 # "density-floor" or "blow-up" or "cfl"
    time: float
    message: str
    location: Optional[tuple] = None
    value: Optional[float] = None


@dataclass
class Trajectory:
    records: list
    snapshots: list = field(default_factory=list)   # (time, State) pairs
    event: Optional[PhysicsEvent] = None
    final_state: Optional[State] = None

    @property
    def times(self):
        return np.array([r.t for r in self.records])


def _wave_nonlinear(plan, psi, u, params):
    # explicit remainder of the wave equation after removing (lam+i)/2 * lap
    psi_hat = plan.fft(psi)
    grad_psi = np.stack([plan.ifft(1j * km * psi_hat, psi) for km in plan.k])
    u_dot_grad = np.sum(u * grad_psi, axis=0)
    speed2 = np.sum(u * u, axis=0)
    cubic = (psi.real ** 2 + psi.imag ** 2) * psi
    return plan.dealias(
        (-1j * params.lam) * u_dot_grad
        - 0.5 * params.lam * speed2 * psi
        - (params.lam + 1j) * params.mu * cubic
    )


def _wave_substep(plan, psi, u, params, tau):
    """Advance the wavefunction by tau with u frozen: exact linear flow
    bracketed around an explicit midpoint stage for the rest."""
    lin = np.exp(-(params.lam + 1j) * 0.5 * plan.k2 * (0.5 * tau))
    psi = plan.ifft(lin * plan.fft(psi), psi)
    k1 = _wave_nonlinear(plan, psi, u, params)
    mid = psi + 0.5 * tau * k1
    k2 = _wave_nonlinear(plan, mid, u, params)
    psi = psi + tau * k2
    psi = plan.ifft(lin * plan.fft(psi), psi)
    return psi


def _fluid_explicit_accel(plan, psi, u, rho, params, rho_bar):
    """Acceleration minus the implicit (nu/rho_bar) lap(u) part."""
    d = plan.grid.d
    state = State(0.0, psi, u, rho, plan.grid)
    coupling = coupling_term(state, params, plan)
    source = momentum_source(state, params, coupling, plan)
    u_hat = plan.fft(u)
    lap_u = plan.ifft(-plan.k2 * u_hat, u)
    inv_rho = 1.0 / rho
    combined = np.empty_like(u)
    for i in range(d):
        advect = sum(u[j] * plan.ifft(1j * plan.k[j] * u_hat[i], u[i]) for j in range(d))
        combined[i] = -advect + (params.nu * lap_u[i] + source[i]) * inv_rho
    accel = plan.dealias(combined) - (params.nu / rho_bar) * lap_u
    return accel, coupling


def _density_rhs(plan, psi, u, rho, params, coupling):
    # divergence of the dealiased flux, fused in spectral space
    state = State(0.0, psi, u, rho, plan.grid)
    flux_hat = plan.fft(rho * u)
    div_hat = sum(1j * plan.k[i] * (plan.dealias_mask * flux_hat[i] if plan.truncate else flux_hat[i])
                  for i in range(plan.grid.d))
    return -plan.ifft(div_hat, rho) + mass_exchange(state, params, coupling)


def _floor_check(rho, params, time):
    idx = int(np.argmin(rho))
    val = float(rho.flat[idx])
    if val < params.eps:
        loc = np.unravel_index(idx, rho.shape)
        raise DensityFloorViolation(time, loc, val, params.eps)


def _fluid_substep(plan, psi, u, rho, params, dt, t0):
    """Midpoint IMEX step for (u, rho) with psi frozen.

    The pressure enters through the density-weighted projection of the
    acceleration: ut = a - (1/rho) grad(p) with a true scalar pressure, so
    the gradient stays energy-orthogonal to the velocity and u remains
    divergence-free.  With uniform density this is the plain Leray
    projection.
    """
    rho_bar = 0.5 * (params.m + params.M)
    alpha = params.nu * dt / (2.0 * rho_bar)

    accel0, coupling0 = _fluid_explicit_accel(plan, psi, u, rho, params, rho_bar)
    accel0, pressure = plan.weighted_leray_project(accel0, rho)
    u_half = plan.helmholtz_solve(u + 0.5 * dt * accel0, alpha)
    rho_half = rho + 0.5 * dt * _density_rhs(plan, psi, u, rho, params, coupling0)
    _floor_check(rho_half, params, t0 + 0.5 * dt)

    accel1, coupling1 = _fluid_explicit_accel(plan, psi, u_half, rho_half, params, rho_bar)
    accel1, _ = plan.weighted_leray_project(accel1, rho_half, initial_pressure=pressure)
    lap_u = plan.laplacian(u)
    u_new = plan.helmholtz_solve(u + alpha * lap_u + dt * accel1, alpha)
    rho_new = rho + dt * _density_rhs(plan, psi, u_half, rho_half, params, coupling1)
    _floor_check(rho_new, params, t0 + dt)
    return u_new, rho_new


def step(state, params, dt, config=None):
    """Advance one Strang step of size dt (dt < 0 is allowed for reversal
    experiments with the dissipative constants set to zero)."""
    if dt == 0:
        raise ValueError("dt must be nonzero")
    truncate = config.dealias if config is not None else True
    plan = plan_for(state.grid, truncate=truncate)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        psi = _wave_substep(plan, state.psi, state.u, params, 0.5 * dt)
        u, rho = _fluid_substep(plan, psi, state.u, state.rho, params, dt, state.t)
        psi = _wave_substep(plan, psi, u, params, 0.5 * dt)
    new = State(state.t + dt, psi, u, rho, state.grid)
    if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(u)) and np.all(np.isfinite(rho))):
        raise BlowUp(state.t, "step output")
    return new


def adaptive_dt(state, config):
    """CFL-limited step: clamp(cfl * dx / (||u||_inf + c0), dt_min, dt_max)
    with c0 = max(1, k_max/2) covering the explicit dispersive residuals."""
    g = state.grid
    umax = lp_norm(g, state.u, np.inf)
    c0 = max(1.0, 0.5 * g.k_max)
    proposal = config.cfl * min(g.dx) / (umax + c0)
    if proposal < config.dt_min:
        raise CflViolation(proposal, config.dt_min, state.t)
    return min(max(proposal, config.dt_min), config.dt_max)


def ingest(state, params):
    """Validate and normalize initial data: band-limit the fields and project
    the velocity onto its divergence-free part.  Requires rho0 in [m, M]."""
    state.validate()
    if state.t != 0.0:
        raise ValueError(f"initial state must start at t=0, got t={state.t}")
    rmin, rmax = float(state.rho.min()), float(state.rho.max())
    if rmin < params.m or rmax > params.M:
        raise ValueError(
            f"initial density must lie in [m, M] = [{params.m}, {params.M}], "
            f"got range [{rmin:.6g}, {rmax:.6g}]"
        )
    plan = plan_for(state.grid)
    psi = plan.dealias(state.psi)
    rho = plan.dealias(state.rho)
    u = np.stack([plan.dealias(state.u[i]) for i in range(state.grid.d)])
    u, _ = plan.leray_project(u)
    return State(0.0, psi, u, rho, state.grid)


def run(initial, params, config, horizon, observers=(), snapshot_every=0, store_states=False):
    """Integrate from t=0 to the horizon and collect diagnostics.

    A record is produced for every accepted step (the initial state included).
    Observers are called after each accepted step with (time, state, record)
    and must not mutate the state.  snapshot_every > 0 stores a state copy
    every that many steps (plus the initial and final states); store_states
    stores every step, which the stability harness uses at desk scales.

    Density-floor violations and blow-ups end the run early with a structured
    event on the trajectory; the records collected so far are kept.
    """
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    state = ingest(initial, params)
    rec = measure(state, params)
    records = [rec]
    snapshots = []
    if snapshot_every > 0 or store_states:
        snapshots.append((state.t, state.copy()))
    event = None
    n_steps = 0
    tiny = 1e-12 * max(1.0, horizon)
    while state.t < horizon - tiny:
        try:
            dt = adaptive_dt(state, config) if config.adaptive else config.dt_init
            dt = min(dt, horizon - state.t)
            new_state = step(state, params, dt, config)
        except DensityFloorViolation as exc:
            event = PhysicsEvent("density-floor", exc.time, str(exc), exc.location, exc.value)
            break
        except BlowUp as exc:
            event = PhysicsEvent("blow-up", exc.last_valid_time, str(exc))
            break
        except CflViolation as exc:
            event = PhysicsEvent("cfl", exc.time, str(exc))
            break
        rec = measure(new_state, params, prev_state=state)
        records.append(rec)
        n_steps += 1
        state = new_state
        if store_states or (snapshot_every > 0 and n_steps % snapshot_every == 0):
            snapshots.append((state.t, state.copy()))
        for obs in observers:
            obs(state.t, state, rec)
    if snapshot_every > 0 and not store_states and (not snapshots or snapshots[-1][0] != state.t):
        snapshots.append((state.t, state.copy()))
    return Trajectory(records=records, snapshots=snapshots, event=event, final_state=state)
