"""Spectral fields on the 2D torus and the operations connecting them.

Conventions used throughout the package:

* A spectral field stores the coefficients ``c[k1, k2]`` of the expansion
  ``u(x) = sum_k c_k exp(i<k, x>)`` over the centered integer lattice
  ``k1, k2 in [-N/2, N/2 - 1]``.  Arrays are indexed in natural (ascending)
  mode order, row-major: ``coeffs[i, j]`` holds ``k = (i - N/2, j - N/2)``.
* A grid field stores point values at the uniform collocation nodes
  ``x_{jl} = (2*pi*j/N, 2*pi*l/N)`` with ``j, l in [-N/2, N/2 - 1]``, again
  in ascending index order, and carries the mesh weight ``h = 1/N``.
* The forward transform is normalized so that the coefficient array of the
  trigonometric interpolant is the raw DFT divided by ``N**2``.  With that
  scaling a pure mode ``exp(i<k, x>)`` sampled on its own grid transforms to
  a single unit coefficient at ``k``.
* ``l2_norm`` is the true L2(T^2) norm, ``(4*pi^2 * sum |c_k|^2)**0.5``; a
  one-mode field with coefficient ``a`` has norm ``2*pi*|a|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NonFiniteFieldError",
    "SpectralField",
    "GridField",
    "CutoffSpec",
    "mode_values",
    "dft_forward",
    "interpolate",
    "synthesize",
    "project",
    "embed",
    "restrict",
    "l2_norm",
    "sobolev_norm",
    "l2h_norm",
]


class NonFiniteFieldError(ValueError):
    """Raised when a field would store NaN or Inf values."""


def _validate_square(arr: np.ndarray, n: int, what: str) -> None:
    if n < 2 or n % 2 != 0:
        raise ValueError(f"{what} size must be an even integer >= 2, got {n}")
    if arr.shape != (n, n):
        raise ValueError(f"{what} array must have shape ({n}, {n}), got {arr.shape}")
    if not np.isfinite(arr.real).all() or not np.isfinite(arr.imag).all():
        raise NonFiniteFieldError(f"{what} contains non-finite values")


@dataclass(frozen=True)
class SpectralField:
    """Coefficients of a band-limited field on the centered mode lattice.

    Attributes
    ----------
    n_modes : int
        Lattice size N (even, >= 2); modes run over [-N/2, N/2 - 1]^2.
    coeffs : np.ndarray
        Complex (N, N) array, natural mode order, row-major.
    """

    n_modes: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.coeffs, dtype=np.complex128)
        _validate_square(arr, self.n_modes, "coefficient")
        object.__setattr__(self, "coeffs", arr)


@dataclass(frozen=True)
class GridField:
    """Point values on the uniform N x N collocation grid.

    Attributes
    ----------
    n_points : int
        Grid size N (even, >= 2); nodes are x_{jl} = 2*pi*(j, l)/N with
        j, l in [-N/2, N/2 - 1].
    values : np.ndarray
        Complex (N, N) array of point values in ascending node order.
    """

    n_points: int
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.complex128)
        _validate_square(arr, self.n_points, "grid value")
        object.__setattr__(self, "values", arr)

    @property
    def h(self) -> float:
        """Mesh weight 1/N of the discrete l2 norm on the grid."""
        return 1.0 / self.n_points


@dataclass(frozen=True)
class CutoffSpec:
    """Frequency cutoff derived from the filter parameter theta.

    The filter keeps the mode k = (k1, k2) iff ``-cutoff <= ki < cutoff``
    for both components, with ``cutoff = theta**-0.5``.  The comparison is
    a strict floating-point comparison against the integer mode values;
    theta = 4/N^2 gives cutoff = N/2 exactly, so the filter is then the
    identity on an N-mode lattice.
    """

    theta: float
    cutoff: float = field(init=False)

    def __post_init__(self) -> None:
        if not (self.theta > 0.0) or not np.isfinite(self.theta):
            raise ValueError(f"theta must be a positive finite number, got {self.theta}")
        object.__setattr__(self, "cutoff", float(self.theta) ** -0.5)


def mode_values(n: int) -> np.ndarray:
    """Integer mode values -N/2 .. N/2-1 in storage order."""
    return np.arange(-(n // 2), n // 2)


def dft_forward(grid: GridField) -> SpectralField:
    """Forward transform of grid samples to interpolant coefficients.

    Computes ``sum_{j,l} v_{jl} exp(-2*pi*i*(k1*j + k2*l)/N) / N**2`` for
    every mode k on the centered lattice.  The result is the coefficient
    array of the unique band-limited field matching the samples at all
    grid nodes (see :func:`interpolate`).

    Parameters
    ----------
    grid : GridField
        Samples on the N x N collocation grid.

    Returns
    -------
    SpectralField
        Interpolant coefficients on the same lattice size.
    """
    n = grid.n_points
    raw = np.fft.fft2(np.fft.ifftshift(grid.values))
    return SpectralField(n, np.fft.fftshift(raw) / (n * n))


def interpolate(grid: GridField) -> SpectralField:
    """Trigonometric interpolant of grid samples.

    Identical to :func:`dft_forward`: the returned field is the unique one
    supported on the N-mode lattice whose synthesis reproduces the samples
    at every collocation node.
    """
    return dft_forward(grid)


def synthesize(f: SpectralField, n_points: int | None = None) -> GridField:
    """Evaluate a spectral field on a collocation grid.

    Parameters
    ----------
    f : SpectralField
        Field to evaluate.
    n_points : int, optional
        Target grid size M >= n_modes, even.  Defaults to n_modes.
        Evaluation on a finer grid zero-pads the coefficients, which leaves
        the represented function (and its norms) unchanged.

    Returns
    -------
    GridField
        Values ``u(x_{jl})`` on the M x M grid.
    """
    n = f.n_modes
    m = n if n_points is None else n_points
    if m < n:
        raise ValueError(f"target grid {m} is coarser than the mode lattice {n}")
    if m % 2 != 0:
        raise ValueError(f"target grid size must be even, got {m}")
    c = f.coeffs if m == n else embed(f, m).coeffs
    vals = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(c))) * (m * m)
    return GridField(m, vals)


def project(f: SpectralField, cut: CutoffSpec) -> SpectralField:
    """Zero all coefficients outside the square frequency window.

    Keeps the coefficient at k iff ``-cutoff <= ki < cutoff`` holds for
    both components (half-open window).  Orthogonal projection: idempotent,
    self-adjoint, norm non-increasing.
    """
    k = mode_values(f.n_modes)
    keep = (k >= -cut.cutoff) & (k < cut.cutoff)
    out = np.where(keep[:, None] & keep[None, :], f.coeffs, 0.0)
    return SpectralField(f.n_modes, out)


def embed(f: SpectralField, n_modes: int) -> SpectralField:
    """Zero-pad onto a larger mode lattice; the represented field is unchanged."""
    n, m = f.n_modes, n_modes
    if m < n:
        raise ValueError(f"cannot embed lattice {n} into smaller lattice {m}")
    if m % 2 != 0:
        raise ValueError(f"target lattice size must be even, got {m}")
    out = np.zeros((m, m), dtype=np.complex128)
    lo = m // 2 - n // 2
    out[lo : lo + n, lo : lo + n] = f.coeffs
    return SpectralField(m, out)


def restrict(f: SpectralField, n_modes: int) -> SpectralField:
    """Keep the central block of modes; inverse of :func:`embed` there.

    Coefficients outside [-n/2, n/2 - 1]^2 are dropped, so apply a frequency
    projection first when the truncation must be lossless.
    """
    n, m = n_modes, f.n_modes
    if n > m:
        raise ValueError(f"cannot restrict lattice {m} to larger lattice {n}")
    if n % 2 != 0 or n < 2:
        raise ValueError(f"target lattice size must be an even integer >= 2, got {n}")
    lo = m // 2 - n // 2
    return SpectralField(n, f.coeffs[lo : lo + n, lo : lo + n].copy())


def l2_norm(f: SpectralField) -> float:
    """L2(T^2) norm, ``(4*pi^2 * sum_k |c_k|^2)**0.5``."""
    return 2.0 * np.pi * float(np.sqrt(np.vdot(f.coeffs, f.coeffs).real))


def sobolev_norm(f: SpectralField, s: float) -> float:
    """Sobolev H^s norm with weights ``(1 + |k|^2)**s`` on ``|c_k|^2``.

    Reduces to :func:`l2_norm` at s = 0; a one-mode field with coefficient
    a at k has norm ``2*pi*|a|*(1 + |k|^2)**(s/2)``.
    """
    k = mode_values(f.n_modes).astype(np.float64)
    ksq = k[:, None] ** 2 + k[None, :] ** 2
    total = float(np.sum((1.0 + ksq) ** s * (f.coeffs.real**2 + f.coeffs.imag**2)))
    return 2.0 * np.pi * float(np.sqrt(total))


def l2h_norm(grid: GridField) -> float:
    """Discrete l2 norm of grid samples, ``(h^2 * sum |v_{jl}|^2)**0.5``.

    With the 2*pi factor of the torus measure, ``2*pi*l2h_norm`` is the
    rectangle-rule quadrature of the L2 norm, exact for band-limited fields
    sampled without aliasing.
    """
    return float(np.sqrt(np.vdot(grid.values, grid.values).real)) / grid.n_points
