"""Zero-mean periodic real fields and their spectral calculus.

A field lives on [0, length) and is stored through its positive-wavenumber
Fourier coefficients ``coeff[k-1] = u_hat(k)`` for k = 1..modes, with
``u_hat(-k) = conj(u_hat(k))`` implied (real field) and the zero mode
structurally absent (zero mean).  Physically

    u(x) = sum_{1<=|k|<=m} u_hat(k) exp(i xi_k x),      xi_k = 2*pi*k/length.

Quadrature uses ``points >= 4*modes`` samples so that cubic integrands of
band-limited fields are alias-free: integrals of u^2 and u^3 computed from
the sample grid are exact for fields on the retained band.

Coordinates: the real orthonormal basis e_{2k-1} = sqrt(2/A) sin(xi_k x),
e_{2k} = sqrt(2/A) cos(xi_k x) gives u = sum_j a_j e_j with

    a_{2k-1} = -sqrt(2A) Im u_hat(k),    a_{2k} = sqrt(2A) Re u_hat(k),

so ||u||_{L2}^2 = sum_j a_j^2 = 2A sum_k |u_hat(k)|^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * math.pi

FIELD_FORMAT = "ostlab-field-v1"

__all__ = [
    "FIELD_FORMAT",
    "FourierField",
    "GridSpec",
    "coordinates",
    "cubic_g",
    "dispersion",
    "dx",
    "dx_inv",
    "energy_eigenvalues",
    "field_from_coordinates",
    "from_physical",
    "hamiltonian",
    "inner",
    "l2_norm",
    "load_field",
    "make_grid",
    "project",
    "quadratic_energy",
    "random_smooth_field",
    "regrid",
    "save_field",
    "sobolev_norm",
    "to_physical",
    "zero_field",
]


@dataclass(frozen=True)
class GridSpec:
    """Truncated Fourier grid on [0, length).

    modes:  highest retained wavenumber index m (field carries k = 1..m).
    points: quadrature grid size N; must satisfy N >= 4*modes so that
            products up to cubic order are alias-free on the retained band.
    """

    length: float
    modes: int
    points: int

    def __post_init__(self):
        object.__setattr__(self, "length", float(self.length))
        for name in ("modes", "points"):
            value = getattr(self, name)
            if int(value) != value:
                raise ValueError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if not math.isfinite(self.length) or self.length <= 0.0:
            raise ValueError(f"length must be positive and finite, got {self.length}")
        if self.modes < 1:
            raise ValueError(f"modes must be >= 1, got {self.modes}")
        if self.points < 4 * self.modes:
            raise ValueError(
                f"points must be >= 4*modes = {4 * self.modes}, got {self.points}"
            )

    @property
    def xi(self) -> np.ndarray:
        """Physical wavenumbers xi_k = 2*pi*k/length for k = 1..modes."""
        return (TWO_PI / self.length) * np.arange(1, self.modes + 1)

    @property
    def x(self) -> np.ndarray:
        """Quadrature nodes x_j = j*length/points."""
        return (self.length / self.points) * np.arange(self.points)


def make_grid(modes: int, length: float = TWO_PI, points: int | None = None) -> GridSpec:
    """Grid with the default alias-free quadrature size points = 4*modes."""
    return GridSpec(length=length, modes=modes, points=4 * modes if points is None else points)


@dataclass(frozen=True, eq=False)
class FourierField:
    """Real zero-mean field stored by its positive-mode coefficients."""

    grid: GridSpec
    coeff: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeff, dtype=np.complex128)
        if c.shape != (self.grid.modes,):
            raise ValueError(
                f"coeff must have shape ({self.grid.modes},), got {c.shape}"
            )
        if not np.isfinite(c).all():
            raise ValueError("coeff must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeff", c)


def zero_field(grid: GridSpec) -> FourierField:
    return FourierField(grid, np.zeros(grid.modes, dtype=np.complex128))


def random_smooth_field(grid: GridSpec, rng: np.random.Generator, k0: float = 2.0, norm: float = 1.0) -> FourierField:
    """Random field with Gaussian-decaying spectrum, scaled to L2 norm ``norm``.

    Coefficients are complex standard normals damped by exp(-(k/k0)^2), so
    k0 sets how many modes carry appreciable energy.  Smooth ensembles like
    this keep time-integration error at scheme level; see the conservation
    tests for the contrast with slowly-decaying spectra.
    """
    if not (k0 > 0.0 and math.isfinite(k0)):
        raise ValueError(f"k0 must be positive, got {k0}")
    if not (norm > 0.0 and math.isfinite(norm)):
        raise ValueError(f"norm must be positive, got {norm}")
    k = np.arange(1, grid.modes + 1)
    z = rng.standard_normal(grid.modes) + 1j * rng.standard_normal(grid.modes)
    coeff = z * np.exp(-((k / k0) ** 2))
    scale = norm / _l2(coeff[None, :], grid.length)[0]
    return FourierField(grid, coeff * scale)


# ---------------------------------------------------------------------------
# transforms
#
# The underscore helpers operate on (..., modes) coefficient stacks and
# (..., points) sample stacks; the public functions wrap single fields.


def _to_physical(coeff: np.ndarray, grid: GridSpec) -> np.ndarray:
    m, n = grid.modes, grid.points
    spec = np.zeros(coeff.shape[:-1] + (n // 2 + 1,), dtype=np.complex128)
    spec[..., 1 : m + 1] = coeff * n
    return np.fft.irfft(spec, n=n, axis=-1)


def _from_physical(samples: np.ndarray, grid: GridSpec) -> np.ndarray:
    # rows 1..m of the forward transform; row 0 (the mean) is discarded
    return np.fft.rfft(samples, axis=-1)[..., 1 : grid.modes + 1] / grid.points


def to_physical(f: FourierField) -> np.ndarray:
    """Samples of f on the quadrature grid (zero-padded inverse transform)."""
    return _to_physical(f.coeff, f.grid)


def from_physical(samples: np.ndarray, grid: GridSpec) -> FourierField:
    """Field with the coefficients of ``samples`` on modes 1..m.

    The sample mean and any content above mode m are discarded.
    Rejects non-finite samples.
    """
    s = np.asarray(samples, dtype=np.float64)
    if s.shape != (grid.points,):
        raise ValueError(f"expected {grid.points} samples, got shape {s.shape}")
    if not np.isfinite(s).all():
        raise ValueError("samples must be finite")
    return FourierField(grid, _from_physical(s, grid))


# ---------------------------------------------------------------------------
# multipliers and projections


def dx(f: FourierField) -> FourierField:
    """Derivative: multiply mode k by i*xi_k."""
    return FourierField(f.grid, 1j * f.grid.xi * f.coeff)


def dx_inv(f: FourierField) -> FourierField:
    """Antiderivative on the zero-mean band: divide mode k by i*xi_k.

    Exact inverse of dx; no zero mode exists, so this is always defined.
    """
    return FourierField(f.grid, f.coeff / (1j * f.grid.xi))


def project(f: FourierField, m_prime: int) -> FourierField:
    """Orthogonal projection onto modes |k| <= m_prime (same grid).

    Idempotent and self-adjoint; m_prime >= modes leaves f unchanged.
    """
    if int(m_prime) != m_prime or m_prime <= 0:
        raise ValueError(f"m_prime must be a positive integer, got {m_prime!r}")
    if m_prime >= f.grid.modes:
        return f
    c = f.coeff.copy()
    c[int(m_prime):] = 0.0
    return FourierField(f.grid, c)


def regrid(f: FourierField, grid: GridSpec) -> FourierField:
    """Move f to another grid of the same length (pad or truncate modes)."""
    if grid.length != f.grid.length:
        raise ValueError("regrid requires equal domain lengths")
    m = min(f.grid.modes, grid.modes)
    c = np.zeros(grid.modes, dtype=np.complex128)
    c[:m] = f.coeff[:m]
    return FourierField(grid, c)


def dispersion(k, grid: GridSpec):
    """Dispersion symbol m(xi) = xi^3 - 1/xi at xi = 2*pi*k/length.

    Odd in k; undefined (and rejected) at k = 0.  This is the modulation
    symbol weighting the space-time lattice norms; see the bourgain module.
    """
    karr = np.asarray(k, dtype=np.float64)
    if np.any(karr == 0):
        raise ValueError("dispersion is undefined at k = 0")
    xi = (TWO_PI / grid.length) * karr
    out = xi**3 - 1.0 / xi
    return float(out) if karr.ndim == 0 else out


def energy_eigenvalues(grid: GridSpec) -> np.ndarray:
    """Symbol s_k = xi_k^2 + xi_k^{-2} of the positive operator S.

    S is the quadratic-energy operator: (Su, u) = int u_x^2 + int (dx_inv u)^2.
    Each s_k carries multiplicity two (sine and cosine directions).
    """
    xi = grid.xi
    return xi**2 + xi**-2


# ---------------------------------------------------------------------------
# norms and functionals


def _l2(coeff: np.ndarray, length: float) -> np.ndarray:
    return np.sqrt(2.0 * length * np.sum(np.abs(coeff) ** 2, axis=-1))


def l2_norm(f: FourierField) -> float:
    """L2 norm, calibrated to the integral: l2_norm(f)^2 = int f^2 dx."""
    return float(_l2(f.coeff, f.grid.length))


def sobolev_norm(f: FourierField, s: float) -> float:
    """Sobolev norm (2A sum <xi_k>^{2s} |u_hat(k)|^2)^{1/2}, <x> = sqrt(1+x^2).

    The 2A normalization makes sobolev_norm(f, 0) == l2_norm(f).
    """
    w = (1.0 + f.grid.xi**2) ** s
    return float(np.sqrt(2.0 * f.grid.length * np.sum(w * np.abs(f.coeff) ** 2)))


def inner(f: FourierField, g: FourierField) -> float:
    """L2 pairing int f g dx."""
    if g.grid != f.grid:
        raise ValueError("fields must share a grid")
    return float(2.0 * f.grid.length * np.sum(f.coeff * np.conj(g.coeff)).real)


def _cubic_g(coeff: np.ndarray, grid: GridSpec) -> np.ndarray:
    u = _to_physical(coeff, grid)
    return (grid.length / 3.0) * np.mean(u**3, axis=-1)


def cubic_g(f: FourierField) -> float:
    """Cubic functional g(u) = (1/3) int u^3 dx (alias-free quadrature)."""
    return float(_cubic_g(f.coeff, f.grid))


def _quadratic_energy(coeff: np.ndarray, grid: GridSpec) -> np.ndarray:
    s = energy_eigenvalues(grid)
    return grid.length * np.sum(s * np.abs(coeff) ** 2, axis=-1)


def quadratic_energy(f: FourierField) -> float:
    """(1/2)(Su, u) = (1/2) int u_x^2 + (1/2) int (dx_inv u)^2."""
    return float(_quadratic_energy(f.coeff, f.grid))


def _hamiltonian(coeff: np.ndarray, grid: GridSpec) -> np.ndarray:
    return _quadratic_energy(coeff, grid) + _cubic_g(coeff, grid)


def hamiltonian(f: FourierField) -> float:
    """H(u) = (1/2)(Su, u) + g(u); the quadratic part is nonnegative."""
    return float(_hamiltonian(f.coeff, f.grid))


# ---------------------------------------------------------------------------
# real coordinates


def _coeff_to_coords(coeff: np.ndarray, grid: GridSpec) -> np.ndarray:
    root = math.sqrt(2.0 * grid.length)
    a = np.empty(coeff.shape[:-1] + (2 * grid.modes,))
    a[..., 0::2] = -root * coeff.imag
    a[..., 1::2] = root * coeff.real
    return a


def _coords_to_coeff(a: np.ndarray, grid: GridSpec) -> np.ndarray:
    root = math.sqrt(2.0 * grid.length)
    return (a[..., 1::2] - 1j * a[..., 0::2]) / root


def coordinates(f: FourierField) -> np.ndarray:
    """Coefficients a_j of f in the interleaved sine/cosine basis (2m values)."""
    return _coeff_to_coords(f.coeff, f.grid)


def field_from_coordinates(grid: GridSpec, a) -> FourierField:
    """Field u = sum_j a_j e_j from 2m interleaved sine/cosine amplitudes."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.shape != (2 * grid.modes,):
        raise ValueError(f"expected {2 * grid.modes} coordinates, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("coordinates must be finite")
    return FourierField(grid, _coords_to_coeff(arr, grid))


# ---------------------------------------------------------------------------
# serialization: CSV of (k, re, im) with a header recording the grid.
# repr() round-trips doubles exactly, so save/load is bit-exact.


def save_field(f: FourierField, path) -> None:
    lines = [
        f"# {FIELD_FORMAT} length={f.grid.length!r} modes={f.grid.modes} points={f.grid.points}",
        "k,re,im",
    ]
    for k, c in enumerate(f.coeff, start=1):
        lines.append(f"{k},{float(c.real)!r},{float(c.imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_field(path) -> FourierField:
    text = Path(path).read_text(encoding="ascii").strip().splitlines()
    if len(text) < 2 or not text[0].startswith(f"# {FIELD_FORMAT} "):
        raise ValueError(f"{path}: not a {FIELD_FORMAT} file")
    meta = dict(tok.split("=", 1) for tok in text[0].split()[2:])
    grid = GridSpec(
        length=float(meta["length"]), modes=int(meta["modes"]), points=int(meta["points"])
    )
    if text[1] != "k,re,im":
        raise ValueError(f"{path}: missing column header")
    rows = [line.split(",") for line in text[2:]]
    if len(rows) != grid.modes or any(int(r[0]) != k for k, r in enumerate(rows, start=1)):
        raise ValueError(f"{path}: expected rows k = 1..{grid.modes}")
    c = np.array([float(r[1]) + 1j * float(r[2]) for r in rows], dtype=np.complex128)
    return FourierField(grid, c)
