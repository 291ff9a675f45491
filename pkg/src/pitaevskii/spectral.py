"""Fourier differential operators, Leray projection, dealiasing and Helmholtz solves.

A SpectralPlan caches the multiplier tables for one grid.  Plans are immutable
after construction and safe to share across concurrent runs; every method is a
pure function of its inputs.  Real input fields produce real outputs (the
imaginary FFT residue is dropped), complex inputs stay complex.
"""

import numpy as np

from .grid import GridError


class SpectralPlan:
    """Cached spectral operators for one grid.

    truncate=False builds a plan whose dealias() is a pass-through; the
    integrator uses it when truncation is switched off in the step config.
    """

    def __init__(self, grid, truncate=True):
        self.grid = grid
        self.truncate = truncate
        d = grid.d
        self._axes = tuple(range(-d, 0))
        self.k = grid.k_mesh
        self.k2 = grid.k2_mesh
        # inverse Laplacian with the mean mode mapped to 0
        k2_safe = self.k2.copy()
        k2_safe[(0,) * d] = 1.0
        self._inv_k2 = 1.0 / k2_safe
        self._inv_k2[(0,) * d] = 0.0
        # 2/3-rule mask on integer mode indices: drop any |m_i| > n_i/3
        mask = np.ones(grid.shape, dtype=bool)
        for i, modes in enumerate(grid.mode_axes):
            keep = np.abs(modes) <= grid.n[i] / 3.0
            mask &= keep.reshape([-1 if i == j else 1 for j in range(d)])
        self.dealias_mask = mask

    # -- transforms ------------------------------------------------------

    def fft(self, f):
        return np.fft.fftn(f, axes=self._axes)

    def ifft(self, fhat, like):
        out = np.fft.ifftn(fhat, axes=self._axes)
        return out if np.iscomplexobj(like) else out.real

    def _check(self, f, vector=False):
        f = np.asarray(f)
        if vector:
            if not self.grid.is_vector(f):
                raise GridError(f"expected a vector field on grid {self.grid.shape}, got shape {f.shape}")
        else:
            if not self.grid.is_scalar(f):
                raise GridError(f"expected a scalar field on grid {self.grid.shape}, got shape {f.shape}")
        return f

    # -- calculus --------------------------------------------------------

    def gradient(self, f):
        f = self._check(f)
        fhat = self.fft(f)
        comps = [self.ifft(1j * km * fhat, f) for km in self.k]
        return np.stack(comps)

    def divergence(self, v):
        v = self._check(v, vector=True)
        vhat = self.fft(v)
        dhat = sum(1j * km * vhat[i] for i, km in enumerate(self.k))
        return self.ifft(dhat, v)

    def laplacian(self, f):
        f = np.asarray(f)
        self.grid.check_field(f)
        return self.ifft(-self.k2 * self.fft(f), f)

    def leray_project(self, v):
        """Split v into a divergence-free part and a gradient potential.

        Returns (w, chi) with w + grad(chi) = v, div(w) = 0 to round-off and
        chi mean-free.  The mean (k=0) mode of v is left in w untouched, so
        uniform flows pass through the projector.
        """
        v = self._check(v, vector=True)
        vhat = self.fft(v)
        kdotv = sum(km * vhat[i] for i, km in enumerate(self.k))
        coeff = kdotv * self._inv_k2          # zero on the mean mode
        what = vhat - np.stack([km * coeff for km in self.k])
        chihat = -1j * coeff
        w = self.ifft(what, v)
        chi = self.ifft(chihat, v[0])
        return w, chi

    def weighted_leray_project(self, v, weight, tol=1e-10, max_iter=200,
                               initial_pressure=None):
        """Project v onto divergence-free fields, orthogonally in the
        weight-ed L^2 metric: returns (w, p) with

            w = v - (1/weight) grad(p),   div(w) = 0 (to round-off).

        This is the pressure elimination for variable-density flow: with
        weight = rho the correction (1/rho) grad(p) uses a true scalar
        pressure, which keeps grad(p) energy-orthogonal to the velocity.
        Constant weight reduces to leray_project at no extra cost.

        Solved by a preconditioned fixed-point iteration on
        div((1/weight) grad p) = div(v); the contraction factor is
        (max r - min r)/(max r + min r) with r = 1/weight, so any strictly
        positive weight converges.  initial_pressure warm-starts the
        iteration (the integrator reuses the previous stage's pressure).
        The divergence of w is exact to round-off regardless of tol; tol only
        controls the accuracy of the pressure split.
        """
        v = self._check(v, vector=True)
        weight = np.asarray(weight)
        if not self.grid.is_scalar(weight):
            raise GridError("projection weight must be a scalar field")
        wmin = float(weight.min())
        if not wmin > 0:
            raise ValueError(f"projection weight must be positive, got min {wmin}")
        r = 1.0 / weight
        r_lo, r_hi = float(r.min()), float(r.max())
        r_bar = 0.5 * (r_lo + r_hi)
        dev = r - r_bar

        vhat = self.fft(v)
        div_v_hat = sum(1j * km * vhat[i] for i, km in enumerate(self.k))
        if r_hi - r_lo <= 1e-14 * r_bar:
            # uniform weight: div(v) = r lap(p) solves in one shot
            phat = -div_v_hat * self._inv_k2 / r_bar
            p = self.ifft(phat, v[0])
            w, _ = self.leray_project(v)
            return w, p

        scale = float(np.abs(div_v_hat).max())
        if scale == 0.0:
            return v.copy(), np.zeros(self.grid.shape)
        if initial_pressure is None:
            phat = -div_v_hat * self._inv_k2 / r_bar
        else:
            phat = self.fft(np.asarray(initial_pressure).astype(complex))
        for _ in range(max_iter):
            grad_p = [self.ifft(1j * km * phat, v[0]) for km in self.k]
            corr = [self.fft(dev * g) for g in grad_p]
            div_corr_hat = sum(1j * km * corr[i] for i, km in enumerate(self.k))
            phat_new = -(div_v_hat - div_corr_hat) * self._inv_k2 / r_bar
            delta = float(np.abs(phat_new - phat).max())
            phat = phat_new
            if delta <= tol * max(float(np.abs(phat).max()), scale):
                break
        p = self.ifft(phat, v[0])
        grad_p = np.stack([self.ifft(1j * km * phat, v[0]) for km in self.k])
        w, _ = self.leray_project(v - dev * grad_p)
        return w, p

    def dealias(self, f):
        """Zero every mode with any |index_i| > n_i/3 (2/3-rule truncation)."""
        f = np.asarray(f)
        self.grid.check_field(f)
        if not self.truncate:
            return f
        return self.ifft(self.dealias_mask * self.fft(f), f)

    def dealias_product(self, a, b):
        """Pointwise product followed by 2/3-rule truncation."""
        return self.dealias(np.asarray(a) * np.asarray(b))

    def helmholtz_solve(self, f, alpha):
        """Invert (I - alpha * Laplacian); alpha = 0 is the identity."""
        if alpha < 0:
            raise ValueError(f"helmholtz coefficient must be >= 0, got {alpha}")
        f = np.asarray(f)
        self.grid.check_field(f)
        if alpha == 0:
            return f.copy()
        return self.ifft(self.fft(f) / (1.0 + alpha * self.k2), f)


def plan_for(grid, truncate=True):
    """Shared SpectralPlan per grid instance (cached on the grid)."""
    attr = "_spectral_plan" if truncate else "_spectral_plan_raw"
    plan = getattr(grid, attr, None)
    if plan is None or plan.grid is not grid:
        plan = SpectralPlan(grid, truncate=truncate)
        setattr(grid, attr, plan)
    return plan
