"""Periodic grids and the wavenumber bookkeeping shared by all field operations.

Fields are plain numpy arrays: a scalar field has shape ``grid.shape``, a
vector field has shape ``(grid.d, *grid.shape)``.  Complex fields carry the
wavefunction, real fields carry velocity, density and derived scalars.  The
grid owns the angular-wavenumber tables and the quadrature weights, so every
norm and spectral operator reads its geometry from here.
"""

import numpy as np


class GridError(ValueError):
    """Invalid grid construction parameters."""


class Grid:
    """Uniform periodic grid on a d-torus (d = 1, 2 or 3).

    Attributes
    ----------
    d : int
        Spatial dimension.
    n : tuple of int
        Points per axis, each even and >= 4.
    lengths : tuple of float
        Physical extent per axis.
    dx : tuple of float
        Node spacing per axis.
    k_axes : list of 1-d arrays
        Angular wavenumbers per axis in FFT order, 2*pi/length * {0, 1, ...,
        n/2-1, -n/2, ..., -1}.  The Nyquist mode -n/2 is present.
    mode_axes : list of 1-d arrays
        Integer mode indices per axis in the same order.
    """

    def __init__(self, d, n, lengths):
        n = tuple(int(v) for v in np.atleast_1d(n))
        lengths = tuple(float(v) for v in np.atleast_1d(lengths))
        if d not in (1, 2, 3):
            raise GridError(f"dimension must be 1, 2 or 3, got {d}")
        if len(n) != d or len(lengths) != d:
            raise GridError(f"need {d} entries in n and lengths, got {len(n)} and {len(lengths)}")
        for v in n:
            if v < 4 or v % 2 != 0:
                raise GridError(f"points per axis must be even and >= 4, got {v}")
        for L in lengths:
            if not (L > 0) or not np.isfinite(L):
                raise GridError(f"axis length must be positive and finite, got {L}")
        total = 1
        for v in n:
            total *= v
        if total > np.iinfo(np.intp).max:
            raise GridError("total point count exceeds the platform index range")

        self.d = d
        self.n = n
        self.lengths = lengths
        self.shape = n
        self.dx = tuple(L / v for L, v in zip(lengths, n))
        self.num_points = total
        self.cell_volume = float(np.prod(self.dx))
        self.volume = float(np.prod(lengths))

        self.mode_axes = [np.rint(np.fft.fftfreq(v) * v).astype(int) for v in n]
        self.k_axes = [2.0 * np.pi / L * m for m, L in zip(self.mode_axes, lengths)]
        # broadcastable meshes: k_mesh[i] has shape (1,..,n_i,..,1)
        self.k_mesh = [k.reshape([-1 if i == j else 1 for j in range(d)]) for i, k in enumerate(self.k_axes)]
        self.k2_mesh = sum(km ** 2 for km in self.k_mesh)
        self.k_max = max(float(np.abs(k).max()) for k in self.k_axes)

    def axis_coordinates(self, i):
        """Node coordinates along axis i, starting at 0."""
        return np.arange(self.n[i]) * self.dx[i]

    def meshes(self):
        """Dense coordinate meshes, one array of shape ``self.shape`` per axis."""
        axes = [self.axis_coordinates(i) for i in range(self.d)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def is_scalar(self, f):
        return np.shape(f) == self.shape

    def is_vector(self, f):
        return np.shape(f) == (self.d,) + self.shape

    def check_field(self, f, name="field"):
        """Raise GridError unless f is a scalar or vector field on this grid."""
        if not (self.is_scalar(f) or self.is_vector(f)):
            raise GridError(f"{name} with shape {np.shape(f)} does not live on grid {self.shape}")

    def __repr__(self):
        return f"Grid(d={self.d}, n={self.n}, lengths={self.lengths})"


def make_grid(d, n, lengths):
    """Build a validated periodic grid; see Grid for the conventions."""
    return Grid(d, n, lengths)


def require_finite(f, name="field"):
    """Raise FloatingPointError if the array contains NaN or Inf."""
    if not np.all(np.isfinite(f)):
        raise FloatingPointError(f"{name} contains non-finite values")
    return f
