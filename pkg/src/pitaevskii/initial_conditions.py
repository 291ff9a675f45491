"""Named initial-condition families.

All families produce smooth fields (a handful of low lattice modes or a
Gaussian-spectrum random draw), so the spectral representation is exact and
the wavefunction regularity assumptions behind the diagnostics hold.  The
run ingests every state through band-limiting and a divergence-free
projection, so families need not project their velocity themselves.
"""

import numpy as np

from .model import State
from .snapshot_io import read_snapshot
from .spectral import plan_for


def _tapered_velocity(grid, amplitude):
    """Taylor-Green style divergence-free velocity (a uniform stream in 1d)."""
    mesh = grid.meshes()
    if grid.d == 1:
        return np.stack([np.full(grid.shape, 0.3 * amplitude)])
    if grid.d == 2:
        x, y = mesh
        return amplitude * np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)])
    x, y, z = mesh
    return amplitude * np.stack([
        np.sin(x) * np.cos(y) * np.cos(z),
        -np.cos(x) * np.sin(y) * np.cos(z),
        np.zeros(grid.shape),
    ])


def smooth_state(grid, params, amplitude):
    """The standard smooth initial condition used by the verification runs."""
    mesh = grid.meshes()
    bump = np.prod(np.stack([np.cos(x) for x in mesh]), axis=0)
    if grid.d == 1:
        swirl = np.sin(mesh[0]) + np.cos(2 * mesh[0])
    else:
        swirl = np.sin(mesh[0]) + np.cos(mesh[1])
    psi = amplitude * (bump + 0.5j * swirl + 0.3)
    u = _tapered_velocity(grid, amplitude)
    rho_mid = 0.5 * (params.m + params.M)
    rho = rho_mid + 0.45 * (params.M - params.m) * bump
    return State(0.0, psi.astype(complex), u, rho, grid)


def plane_wave_state_from_ic(grid, ic):
    """Single-mode wavefunction with uniform velocity and density."""
    mesh = grid.meshes()
    mode = tuple(ic.mode) + (0,) * (grid.d - len(ic.mode))
    phase = sum(mi * xi for mi, xi in zip(mode, mesh))
    a0 = ic.wave_amp * np.exp(1j * ic.wave_phase)
    psi = a0 * np.exp(1j * phase)
    vel = tuple(ic.velocity) + (0.0,) * (grid.d - len(ic.velocity))
    u = np.stack([np.full(grid.shape, v) for v in vel])
    rho = np.full(grid.shape, ic.rho0)
    return State(0.0, psi.astype(complex), u, rho, grid)


def random_smooth_state(grid, params, amplitude, seed, kc=3.0):
    """Seeded Gaussian-spectrum draw, band-limited by construction."""
    rng = np.random.default_rng(seed)
    mask = plan_for(grid).dealias_mask
    decay = np.exp(-grid.k2_mesh / kc ** 2) * mask

    def draw(complex_out=False):
        coeff = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * decay
        f = np.fft.ifftn(coeff) * grid.num_points ** 0.5
        return f if complex_out else f.real

    psi = amplitude * draw(complex_out=True)
    u = amplitude * np.stack([draw() for _ in range(grid.d)])
    raw = draw()
    scale = float(np.abs(raw).max()) or 1.0
    rho = 0.5 * (params.m + params.M) + 0.4 * (params.M - params.m) * raw / scale
    return State(0.0, psi, u, rho, grid)


def floor_breach_state(grid, params, amplitude):
    """Contrived data whose mass exchange pulls the density down locally.

    A real wavefunction with a strong carrier-plus-sideband profile makes
    Re(conj(psi) C[psi]) negative near the trough; with the density started
    close to the floor the run must end in a density-floor event.
    """
    mesh = grid.meshes()
    psi = amplitude * (1.0 + 0.9 * np.cos(mesh[0]))
    u = np.zeros((grid.d,) + grid.shape)
    rho = np.full(grid.shape, params.m + 0.02 * (params.M - params.m))
    return State(0.0, psi.astype(complex), u, rho, grid)


def build_initial_state(grid, params, ic):
    """Dispatch on the configured family."""
    if ic.family == "smooth":
        return smooth_state(grid, params, ic.amplitude)
    if ic.family == "plane-wave":
        return plane_wave_state_from_ic(grid, ic)
    if ic.family == "random-smooth":
        return random_smooth_state(grid, params, ic.amplitude, ic.seed)
    if ic.family == "floor-breach":
        return floor_breach_state(grid, params, ic.amplitude)
    if ic.family == "snapshot":
        return read_snapshot(ic.path, expected_grid=grid)
    raise ValueError(f"unknown initial-condition family {ic.family!r}")
