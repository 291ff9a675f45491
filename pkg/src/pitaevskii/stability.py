"""Paired-trajectory stability experiments.

The uniqueness mechanism of the model is a Gronwall inequality: the squared
difference norms between two solutions grow at most like exp(C * int H) with
an integrable driver H built from norms of the two trajectories.  The
experiment runs a base ("moderate") trajectory and a perturbed ("weak") one,
measures the difference functional

    D(t) = ||grad(psi - psi~)||^2 + ||u - u~||^2 + ||rho - rho~||^2,

assembles the driver bundle H(t), fits the envelope constant on the first
half of the run and validates the envelope on the second half.  A zero
perturbation must reproduce the base run bit for bit, which is the discrete
rendering of "the solutions are identical".

A spatially uniform / single-plane-wave reduction of the full system closes
into a small ODE; reduced_ode_oracle integrates it with a high-order adaptive
scheme and serves as the reference trajectory for integrator accuracy tests.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import norms
from .integrator import run
from .model import State, coupling_term
from .spectral import plan_for

BUNDLES = ("full", "core")


@dataclass
class DifferenceRecord:
    t: float
    wave_l2: float     # ||psi - psi~||_L2^2
    wave_grad: float   # ||grad(psi - psi~)||_L2^2
    vel_l2: float      # ||u - u~||_L2^2
    rho_l2: float      # ||rho - rho~||_L2^2
    total: float       # wave_grad + vel_l2 + rho_l2
    driver: Optional[float] = None

    SCALARS = ("t", "wave_l2", "wave_grad", "vel_l2", "rho_l2", "total", "driver")


@dataclass(frozen=True)
class PerturbationSpec:
    """What to nudge in the initial data and by how much.

    target    -- 'psi', 'u', 'rho' or 'all'
    mode      -- lattice mode of the cosine perturbation pattern
    amplitude -- relative size; 0 means an exact copy (bitwise)
    """

    target: str = "psi"
    mode: tuple = (1, 0)
    amplitude: float = 1e-6

    def __post_init__(self):
        if self.target not in ("psi", "u", "rho", "all"):
            raise ValueError(f"unknown perturbation target {self.target!r}")
        if not self.amplitude >= 0:
            raise ValueError(f"perturbation amplitude must be >= 0, got {self.amplitude}")


def difference_norms(state_a, state_b):
    """Squared difference norms between two states at the same time."""
    if state_a.grid is not state_b.grid:
        raise ValueError("states live on different grids")
    if abs(state_a.t - state_b.t) > 1e-12 * max(1.0, abs(state_a.t)):
        raise ValueError(f"states are at different times: {state_a.t} vs {state_b.t}")
    g = state_a.grid
    dpsi = state_a.psi - state_b.psi
    du = state_a.u - state_b.u
    drho = state_a.rho - state_b.rho
    wave_l2 = norms.lp_norm(g, dpsi, 2) ** 2
    wave_grad = norms.sobolev_norm(g, dpsi, 1.0, homogeneous=True) ** 2
    vel_l2 = norms.lp_norm(g, du, 2) ** 2
    rho_l2 = norms.lp_norm(g, drho, 2) ** 2
    return DifferenceRecord(
        t=float(state_a.t),
        wave_l2=wave_l2,
        wave_grad=wave_grad,
        vel_l2=vel_l2,
        rho_l2=rho_l2,
        total=wave_grad + vel_l2 + rho_l2,
    )


def gronwall_bundle(weak, moderate, params, dt_moderate_u, bundle="full"):
    """Driver H(t) from the dominant monomials of the difference estimates.

    weak is the perturbed trajectory's state, moderate the base one; the
    extra regularity norms (grad rho in L^3, dt u in L^3) are computed on the
    moderate state only, matching the asymmetric roles of the two solutions.
    Constant prefactors are absorbed into the fitted envelope constant.
    """
    if bundle not in BUNDLES:
        raise ValueError(f"unknown bundle {bundle!r}")
    if dt_moderate_u is None:
        raise ValueError("gronwall_bundle needs the time derivative of the moderate velocity")
    g = weak.grid
    plan = plan_for(g)

    u_h1 = norms.sobolev_norm(g, weak.u, 1.0)
    um_h1 = norms.sobolev_norm(g, moderate.u, 1.0)
    psi_h1 = norms.sobolev_norm(g, weak.psi, 1.0)
    psi_h2 = norms.sobolev_norm(g, weak.psi, 2.0)
    psim_h2 = norms.sobolev_norm(g, moderate.psi, 2.0)
    dtu_l3 = norms.lp_norm(g, dt_moderate_u, 3)
    grad_rho_l3 = norms.lp_norm(g, plan.gradient(moderate.rho), 3)

    terms = [
        u_h1 ** 4,
        um_h1 ** 4,
        psi_h2 ** 4,
        psim_h2 ** 4,
        (1.0 + params.mu ** 2) * psi_h1 ** 4,
        dtu_l3 ** 2,
        grad_rho_l3 ** 2,
    ]
    if bundle == "full":
        u_h2 = norms.sobolev_norm(g, weak.u, 2.0)
        um_h2 = norms.sobolev_norm(g, moderate.u, 2.0)
        cw = coupling_term(weak, params)
        cm = coupling_term(moderate, params)
        terms += [
            u_h2 ** 2,
            um_h2 ** 2,
            um_h1 ** 2 * um_h2 ** 2,
            norms.lp_norm(g, cw, 2) * norms.sobolev_norm(g, cw, 1.0),
            um_h1 ** 2 * norms.lp_norm(g, cm, 2) ** 2,
        ]
    return float(sum(terms))


def perturb_state(state, spec, params):
    """Additive single-mode perturbation of the initial data.

    The velocity perturbation is projected divergence-free afterwards; the
    density perturbation is clipped back into [m, M] so the run still
    ingests.  amplitude == 0 returns an exact copy.
    """
    out = state.copy()
    if spec.amplitude == 0:
        return out
    g = state.grid
    plan = plan_for(g)
    mesh = g.meshes()
    mode = tuple(spec.mode) + (0,) * (g.d - len(spec.mode))
    phase = sum(mi * xi for mi, xi in zip(mode, mesh))
    pattern = np.cos(phase)
    pattern_s = np.sin(phase)
    if spec.target in ("psi", "all"):
        scale = float(np.abs(out.psi).max()) or 1.0
        out.psi = out.psi + spec.amplitude * scale * (pattern + 0.5j * pattern_s)
    if spec.target in ("u", "all"):
        scale = float(np.abs(out.u).max()) or 1.0
        bump = np.stack([pattern if i == 0 else 0.5 * pattern_s for i in range(g.d)])
        u, _ = plan.leray_project(out.u + spec.amplitude * scale * bump)
        out.u = u
    if spec.target in ("rho", "all"):
        scale = 0.5 * (params.M - params.m)
        if scale == 0.0:
            raise ValueError("cannot perturb rho: m == M leaves no room inside [m, M]")
        out.rho = np.clip(out.rho + spec.amplitude * scale * pattern, params.m, params.M)
    return out


@dataclass
class StabilityReport:
    records: list
    c_hat: Optional[float]
    envelope_margin: Optional[float]
    driver_integral: float
    determinism_failure: bool
    amplitude: float
    event: Optional[object] = None
    notes: list = field(default_factory=list)

    @property
    def envelope_ok(self):
        return self.envelope_margin is None or self.envelope_margin <= 10.0

    @property
    def passed(self):
        return not self.determinism_failure and self.envelope_ok and self.event is None


def _centered_velocity_rates(snapshots):
    """Centered finite differences of u over stored (t, state) pairs."""
    rates = []
    n = len(snapshots)
    for i in range(n):
        lo = max(i - 1, 0)
        hi = min(i + 1, n - 1)
        dt = snapshots[hi][0] - snapshots[lo][0]
        if dt == 0:
            rates.append(np.zeros_like(snapshots[i][1].u))
        else:
            rates.append((snapshots[hi][1].u - snapshots[lo][1].u) / dt)
    return rates


def fit_envelope(records):
    """Envelope constant from the first half, margin from the second half.

    c_hat is the largest per-step ratio (log D(t+dt) - log D(t)) / int H dt
    over the fitting window; the margin is max D(t) / (D(0) exp(c_hat
    int_0^t H)) over the validation window.  Returns (None, None) when D
    vanishes identically (the zero-perturbation case).
    """
    ts = np.array([r.t for r in records])
    d = np.array([r.total for r in records])
    h = np.array([r.driver for r in records], dtype=float)
    if d[0] == 0.0 or len(records) < 4:
        return None, None, 0.0
    steps_h = 0.5 * (h[1:] + h[:-1]) * np.diff(ts)
    cum_h = np.concatenate([[0.0], np.cumsum(steps_h)])
    t_mid = 0.5 * (ts[0] + ts[-1])
    c_hat = None
    for i in range(len(ts) - 1):
        if ts[i + 1] > t_mid:
            break
        if d[i] > 0 and d[i + 1] > 0 and steps_h[i] > 0:
            slope = (math.log(d[i + 1]) - math.log(d[i])) / steps_h[i]
            c_hat = slope if c_hat is None else max(c_hat, slope)
    if c_hat is None:
        return None, None, float(cum_h[-1])
    margin = 0.0
    for i in range(len(ts)):
        if ts[i] <= t_mid:
            continue
        envelope = d[0] * math.exp(c_hat * cum_h[i])
        if envelope > 0:
            margin = max(margin, d[i] / envelope)
    return c_hat, margin, float(cum_h[-1])


def stability_experiment(initial, params, step_config, spec, horizon, bundle="full",
                         base=None):
    """Run the paired experiment and assemble the report.

    The base run is the moderate trajectory, the perturbed run the weak one.
    Difference and driver records are taken at every accepted step (the two
    runs share step sizes by construction).  A precomputed base trajectory
    (run with store_states=True from the same initial data) can be passed to
    amortize it across an amplitude sweep.
    """
    if base is None:
        base = run(initial, params, step_config, horizon, store_states=True)
    if base.event is not None:
        raise RuntimeError(f"base run did not reach the horizon: {base.event.message}")
    perturbed = run(perturb_state(initial, spec, params), params, step_config, horizon,
                    store_states=True)

    n = min(len(base.snapshots), len(perturbed.snapshots))
    rates = _centered_velocity_rates(base.snapshots[:n])
    records = []
    for i in range(n):
        t_b, st_b = base.snapshots[i]
        t_p, st_p = perturbed.snapshots[i]
        rec = difference_norms(st_p, st_b)
        rec.driver = gronwall_bundle(st_p, st_b, params, rates[i], bundle=bundle)
        records.append(rec)

    determinism_failure = False
    if spec.amplitude == 0.0 and records:
        scale = max(norms.lp_norm(initial.grid, initial.psi, 2) ** 2, 1e-30)
        if records[0].total == 0.0 and any(r.total > 1e-20 * scale for r in records[1:]):
            determinism_failure = True

    c_hat, margin, total_h = fit_envelope(records) if spec.amplitude > 0 else (None, None, 0.0)
    notes = []
    if perturbed.event is not None:
        notes.append(f"perturbed run ended early: {perturbed.event.message}")
    return StabilityReport(
        records=records,
        c_hat=c_hat,
        envelope_margin=margin,
        driver_integral=total_h,
        determinism_failure=determinism_failure,
        amplitude=spec.amplitude,
        event=perturbed.event,
        notes=notes,
    )


# -- reduced plane-wave oracle ---------------------------------------------


@dataclass
class OracleTrajectory:
    ts: np.ndarray
    amp: np.ndarray          # complex wavefunction amplitude a(t)
    vel: np.ndarray          # (n, d) uniform velocity
    rho: np.ndarray          # (n,) uniform density
    mode: np.ndarray         # the lattice wavevector k

    def sample(self, t):
        i = int(np.argmin(np.abs(self.ts - t)))
        return self.amp[i], self.vel[i], self.rho[i]


def reduced_ode_oracle(params, k, a0, u0, rho0, horizon, tol=1e-10, n_samples=401):
    """Integrate the exact plane-wave reduction of the coupled system.

    For psi = a(t) exp(i k.x), uniform u and rho the dynamics closes into

        a'   = -lam beta a - i (|k|^2/2 + mu |a|^2) a
        rho' = 2 lam beta |a|^2
        u'   = 2 lam |a|^2 beta (k - u) / rho,   beta = |k - u|^2/2 + mu |a|^2

    and conserves rho + |a|^2 and rho u + k |a|^2.  DOP853 with rtol = atol =
    tol; the conservation drift is verified to 10 * tol and the run fails if
    that cannot be met.
    """
    if not rho0 > 0:
        raise ValueError(f"need rho0 > 0, got {rho0}")
    if not tol > 0:
        raise ValueError(f"need tol > 0, got {tol}")
    k = np.atleast_1d(np.asarray(k, dtype=float))
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    d = k.size
    k2 = float(np.dot(k, k))

    def rhs(_, y):
        a = y[0] + 1j * y[1]
        u = y[2:2 + d]
        rho = y[2 + d]
        rel = k - u
        beta = 0.5 * float(np.dot(rel, rel)) + params.mu * abs(a) ** 2
        da = -params.lam * beta * a - 1j * (0.5 * k2 + params.mu * abs(a) ** 2) * a
        du = 2.0 * params.lam * abs(a) ** 2 * beta * rel / rho
        drho = 2.0 * params.lam * beta * abs(a) ** 2
        return np.concatenate([[da.real, da.imag], du, [drho]])

    y0 = np.concatenate([[np.real(a0), np.imag(a0)], u0, [rho0]])
    ts = np.linspace(0.0, horizon, n_samples)
    sol = solve_ivp(rhs, (0.0, horizon), y0, method="DOP853",
                    rtol=tol, atol=tol, t_eval=ts, dense_output=False)
    if not sol.success:
        raise RuntimeError(f"oracle integration failed: {sol.message}")

    amp = sol.y[0] + 1j * sol.y[1]
    vel = sol.y[2:2 + d].T.copy()
    rho = sol.y[2 + d]

    mass = rho + np.abs(amp) ** 2
    mom = rho[:, None] * vel + np.outer(np.abs(amp) ** 2, k)
    mass_scale = max(abs(mass[0]), 1.0)
    mom_scale = max(float(np.abs(mom[0]).max()), 1.0)
    drift = max(
        float(np.abs(mass - mass[0]).max()) / mass_scale,
        float(np.abs(mom - mom[0]).max()) / mom_scale,
    )
    if drift > 10.0 * tol:
        raise RuntimeError(
            f"oracle conservation drift {drift:.3e} exceeds 10*tol = {10 * tol:.3e}"
        )
    return OracleTrajectory(ts=ts, amp=amp, vel=vel, rho=rho, mode=k)


def plane_wave_state(grid, k, a0, u0, rho0):
    """The PDE-side initial state matching the oracle's reduction."""
    mesh = grid.meshes()
    k = tuple(k)
    phase = sum(ki * xi for ki, xi in zip(k, mesh))
    psi = a0 * np.exp(1j * phase)
    u = np.stack([np.full(grid.shape, float(v)) for v in np.atleast_1d(u0)])
    rho = np.full(grid.shape, float(rho0))
    return State(0.0, psi.astype(complex), u, rho, grid)
