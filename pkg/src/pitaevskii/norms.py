"""Lebesgue and Sobolev norms on periodic grids.

Conventions:

* ``L^p`` norms use node-sum quadrature, ``(sum |f|^p * cell_volume)^(1/p)``;
  on the torus this is the trapezoid rule and is spectrally accurate for
  smooth integrands.  ``p = inf`` is the max over nodes.
* ``H^s`` norms are spectral: ``sqrt(V * sum (1+|k|^2)^s |fhat_k|^2)`` with
  ``fhat_k`` the Fourier coefficients in the convention ``f = sum fhat_k
  exp(i k.x)``.  The homogeneous variant uses ``|k|^(2s)`` and ignores the
  mean mode, so it vanishes exactly on constants.
* ``W^{1,p}`` is the inhomogeneous form ``(||f||_p^p + ||grad f||_p^p)^(1/p)``.
* Vector fields use the pointwise Euclidean magnitude for ``L^p`` and the
  component-wise sum of spectra for ``H^s``.

The inner product is sesquilinear with the first argument conjugated.
"""

from dataclasses import dataclass

import numpy as np

from .grid import GridError


@dataclass(frozen=True)
class NormSpec:
    """Which norm to compute: kind is 'lp', 'sobolev' or 'w1p'."""

    kind: str
    p: float = 2.0
    s: float = 0.0
    homogeneous: bool = False

    def __post_init__(self):
        if self.kind not in ("lp", "sobolev", "w1p"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind in ("lp", "w1p") and not self.p >= 1:
            raise ValueError(f"integrability index must satisfy p >= 1, got {self.p}")
        if self.kind == "sobolev" and not np.isfinite(self.s):
            raise ValueError("derivative index s must be finite")


def _pointwise_magnitude(grid, f):
    f = np.asarray(f)
    if grid.is_vector(f):
        return np.sqrt(np.sum(np.abs(f) ** 2, axis=0))
    if grid.is_scalar(f):
        return np.abs(f)
    raise GridError(f"field with shape {f.shape} does not live on grid {grid.shape}")


def _spectral_density(grid, f):
    """Squared modulus of the Fourier coefficients, summed over components."""
    f = np.asarray(f)
    axes = tuple(range(-grid.d, 0))
    fhat = np.fft.fftn(f, axes=axes) / grid.num_points
    dens = np.abs(fhat) ** 2
    if grid.is_vector(f):
        dens = dens.sum(axis=0)
    elif not grid.is_scalar(f):
        raise GridError(f"field with shape {f.shape} does not live on grid {grid.shape}")
    return dens


def lp_norm(grid, f, p):
    if not p >= 1:
        raise ValueError(f"integrability index must satisfy p >= 1, got {p}")
    mag = _pointwise_magnitude(grid, f)
    if np.isinf(p):
        return float(mag.max()) if mag.size else 0.0
    return float((np.sum(mag ** p) * grid.cell_volume) ** (1.0 / p))


def sobolev_norm(grid, f, s, homogeneous=False):
    dens = _spectral_density(grid, f)
    if homogeneous:
        weight = np.zeros_like(grid.k2_mesh)
        nz = grid.k2_mesh > 0
        weight[nz] = grid.k2_mesh[nz] ** s
    else:
        weight = (1.0 + grid.k2_mesh) ** s
    total = float(np.sum(weight * dens)) * grid.volume
    return float(np.sqrt(max(total, 0.0)))


def gradient_raw(grid, f):
    """Spectral gradient without plan caching; shape (d, ...) per component.

    norms needs derivatives for W^{1,p} but must stay importable below the
    operator layer, hence this small standalone version.
    """
    f = np.asarray(f)
    axes = tuple(range(-grid.d, 0))
    fhat = np.fft.fftn(f, axes=axes)
    comps = [np.fft.ifftn(1j * km * fhat, axes=axes) for km in grid.k_mesh]
    out = np.stack(comps)
    if not np.iscomplexobj(f):
        out = out.real
    return out


def w1p_norm(grid, f, p):
    if not grid.is_scalar(np.asarray(f)):
        raise GridError("W^{1,p} norm implemented for scalar fields")
    g = gradient_raw(grid, f)
    if np.isinf(p):
        return max(lp_norm(grid, f, p), lp_norm(grid, g, p))
    return float((lp_norm(grid, f, p) ** p + lp_norm(grid, g, p) ** p) ** (1.0 / p))


def norm(grid, f, spec):
    """Dispatch on a NormSpec; returns a nonnegative float."""
    if spec.kind == "lp":
        return lp_norm(grid, f, spec.p)
    if spec.kind == "sobolev":
        return sobolev_norm(grid, f, spec.s, spec.homogeneous)
    return w1p_norm(grid, f, spec.p)


def inner_product(grid, f, g):
    """Sesquilinear L^2 pairing: the first argument is conjugated.

    For vector fields the component pairings are summed.  <f, f> is real and
    equals lp_norm(grid, f, 2)**2 up to round-off.
    """
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape != g.shape:
        raise GridError(f"field shapes {f.shape} and {g.shape} do not match")
    grid.check_field(f)
    val = complex(np.sum(np.conj(f) * g) * grid.cell_volume)
    return val


def integral(grid, f):
    """Plain node-sum integral of a scalar field (complex allowed)."""
    f = np.asarray(f)
    if not grid.is_scalar(f):
        raise GridError("integral expects a scalar field")
    val = np.sum(f) * grid.cell_volume
    return complex(val) if np.iscomplexobj(f) else float(val)


def vector_integral(grid, f):
    """Componentwise integral of a vector field, returns shape (d,)."""
    f = np.asarray(f)
    if not grid.is_vector(f):
        raise GridError("vector_integral expects a vector field")
    return np.sum(f, axis=tuple(range(1, f.ndim))) * grid.cell_volume
