"""Periodic-box discretisation of R^N and Fourier-multiplier operators.

A :class:`Grid` is a uniform box ``[-L/2, L/2)^N`` with ``M`` points per axis;
the origin sits at index ``M//2`` on every axis.  Fields are real sample
arrays on a grid.  Every public quantity is a physical-space integral
(rectangle rule), so the FFT normalisation never leaks out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft
from scipy import ndimage

from .errors import GridMismatch, InvalidGrid, InvalidOrder

# relative tolerance on box lengths when deciding whether two grids coincide
GRID_RTOL = 1e-12


@dataclass(frozen=True)
class Grid:
    N: int
    M: int
    L: float

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N not in (1, 2, 3):
            raise InvalidGrid(f"N must be 1, 2 or 3, got {self.N!r}")
        if not isinstance(self.M, (int, np.integer)) or self.M < 16 or self.M % 2:
            raise InvalidGrid(f"M must be an even integer >= 16, got {self.M!r}")
        if not (math.isfinite(self.L) and self.L > 0):
            raise InvalidGrid(f"L must be positive and finite, got {self.L!r}")

    @property
    def h(self) -> float:
        return self.L / self.M

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.N

    @property
    def size(self) -> int:
        return self.M ** self.N

    @property
    def volume(self) -> float:
        return self.L ** self.N

    @property
    def cell(self) -> float:
        """Quadrature weight h^N."""
        return self.h ** self.N

    @cached_property
    def axis(self) -> np.ndarray:
        return (np.arange(self.M) - self.M // 2) * self.h

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Open-mesh coordinate arrays broadcastable to ``shape``."""
        out = []
        for j in range(self.N):
            sh = [1] * self.N
            sh[j] = self.M
            out.append(self.axis.reshape(sh))
        return tuple(out)

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.coords))

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Symmetric lattice {-M/2, ..., M/2-1} * 2*pi/L."""
        return np.arange(-self.M // 2, self.M // 2) * (2 * np.pi / self.L)

    @cached_property
    def _kaxes(self) -> tuple[np.ndarray, ...]:
        out = []
        for j in range(self.N):
            if j == self.N - 1:
                k = 2 * np.pi * sfft.rfftfreq(self.M, d=self.h)
                n = self.M // 2 + 1
            else:
                k = 2 * np.pi * sfft.fftfreq(self.M, d=self.h)
                n = self.M
            sh = [1] * self.N
            sh[j] = n
            out.append(k.reshape(sh))
        return tuple(out)

    @cached_property
    def kabs(self) -> np.ndarray:
        """|k| on the half-spectrum lattice used by the real transforms."""
        return np.sqrt(sum(k * k for k in self._kaxes))

    @cached_property
    def _nyquist_free(self) -> tuple[np.ndarray, ...]:
        # odd multipliers must vanish on the Nyquist plane to keep fields real
        out = []
        for j, k in enumerate(self._kaxes):
            k = k.copy()
            k.reshape(-1)[self.M // 2] = 0.0
            out.append(k)
        return tuple(out)

    @cached_property
    def plancherel(self) -> np.ndarray:
        """Weights folding the half spectrum back onto the full one."""
        n = self.M // 2 + 1
        w = np.full(n, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        sh = [1] * self.N
        sh[-1] = n
        return w.reshape(sh) * (self.cell / self.size)

    @cached_property
    def _symbols(self) -> dict:
        return {}

    def symbol(self, s: float) -> np.ndarray:
        """The multiplier |k|^{2s} (zero mode mapped to 0)."""
        key = float(s)
        sym = self._symbols.get(key)
        if sym is None:
            sym = self.kabs ** (2 * key)
            sym.flat[0] = 0.0
            sym.setflags(write=False)
            self._symbols[key] = sym
        return sym

    def rescaled(self, factor: float) -> "Grid":
        return Grid(self.N, self.M, self.L * factor)

    def same_as(self, other: "Grid") -> bool:
        return (self.N == other.N and self.M == other.M
                and math.isclose(self.L, other.L, rel_tol=GRID_RTOL, abs_tol=0.0))

    def header(self) -> dict:
        return {"N": int(self.N), "M": int(self.M), "L": float(self.L)}


def make_grid(N: int, M: int, L: float) -> Grid:
    return Grid(int(N) if isinstance(N, (int, np.integer)) else N,
                int(M) if isinstance(M, (int, np.integer)) else M, float(L))


class Field:
    """Real samples on a :class:`Grid`; immutable once built."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=float, copy=True)
        if arr.size != grid.size:
            raise InvalidGrid(f"expected {grid.size} samples, got {arr.size}")
        arr = arr.reshape(grid.shape)
        if not np.all(np.isfinite(arr)):
            raise ValueError("field contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    def __repr__(self):
        return f"Field(grid={self.grid!r}, max={self.values.max():.6g})"

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        return cls(grid, np.broadcast_to(fn(*grid.coords), grid.shape))

    def _other(self, other):
        if isinstance(other, Field):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._other(other))

    def __neg__(self):
        return Field(self.grid, -self.values)

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())


def check_same_grid(*fields: Field) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if not g.same_as(f.grid):
            raise GridMismatch(f"fields live on different grids: {g} vs {f.grid}")
    return g


# -- raw-array transforms (used by the solvers' inner loops) -----------------

def rfft(grid: Grid, a: np.ndarray) -> np.ndarray:
    return sfft.rfftn(a, axes=tuple(range(grid.N)))


def irfft(grid: Grid, ahat: np.ndarray) -> np.ndarray:
    return sfft.irfftn(ahat, s=grid.shape, axes=tuple(range(grid.N)))


def apply_multiplier(grid: Grid, a: np.ndarray, mult: np.ndarray) -> np.ndarray:
    return irfft(grid, mult * rfft(grid, a))


def spectral_quadratic(grid: Grid, ahat: np.ndarray, mult=None) -> float:
    """sum_k mult(k)|a_k|^2 with weights matching ``h^N sum a^2``."""
    w = grid.plancherel if mult is None else grid.plancherel * mult
    return float(np.sum(w * (ahat.real ** 2 + ahat.imag ** 2)))


def dilation_generator(grid: Grid, a: np.ndarray, ahat=None) -> np.ndarray:
    """(N/2) a + x . grad a, the derivative of l -> l*a at l=0 divided by s."""
    if ahat is None:
        ahat = rfft(grid, a)
    out = 0.5 * grid.N * a
    for x, k in zip(grid.coords, grid._nyquist_free):
        out = out + x * irfft(grid, 1j * k * ahat)
    return out


# -- Field operations ---------------------------------------------------------

def _check_order(s: float):
    if not (0.0 < s <= 1.0):
        raise InvalidOrder(f"fractional order must lie in (0, 1], got {s}")


def frac_laplacian(u: Field, s: float) -> Field:
    """(-Delta)^s u via the multiplier |k|^{2s}."""
    _check_order(s)
    g = u.grid
    return Field(g, apply_multiplier(g, u.values, g.symbol(s)))


def hs_seminorm_sq(u: Field, s: float) -> float:
    """Integral of |(-Delta)^{s/2} u|^2, i.e. the Plancherel sum of |k|^{2s}|u_k|^2."""
    g = u.grid
    return spectral_quadratic(g, rfft(g, u.values), g.symbol(s))


def mass(u: Field) -> float:
    return float(u.grid.cell * np.sum(u.values ** 2))


def spectral_mass(u: Field) -> float:
    return spectral_quadratic(u.grid, rfft(u.grid, u.values))


def lp_integral(u: Field, q: float) -> float:
    if q < 1:
        raise ValueError(f"exponent must be >= 1, got {q}")
    return float(u.grid.cell * np.sum(np.abs(u.values) ** q))


def inner(u: Field, v: Field) -> float:
    g = check_same_grid(u, v)
    return float(g.cell * np.sum(u.values * v.values))


def l2_norm(u: Field) -> float:
    return math.sqrt(mass(u))


def tail_ratio(u: Field) -> float:
    """Largest |u| on the box faces relative to the peak."""
    a = np.abs(u.values)
    peak = a.max()
    if peak == 0:
        return 0.0
    edge = max(float(np.take(a, 0, axis=j).max()) for j in range(u.grid.N))
    return edge / float(peak)


def peak_index(u: Field) -> tuple[int, ...]:
    return tuple(int(i) for i in np.unravel_index(np.argmax(u.values), u.grid.shape))


def peak_offset(u: Field) -> np.ndarray:
    """Sub-cell peak location relative to the origin, in units of h.

    A parabola through the maximum and its neighbours on each axis.
    """
    idx = peak_index(u)
    a = u.values
    M = u.grid.M
    off = []
    for j, i in enumerate(idx):
        lo = list(idx)
        hi = list(idx)
        lo[j] = (i - 1) % M
        hi[j] = (i + 1) % M
        fm, f0, fp = a[tuple(lo)], a[idx], a[tuple(hi)]
        den = fm - 2 * f0 + fp
        frac = 0.5 * (fm - fp) / den if den != 0 else 0.0
        off.append(i - M // 2 + frac)
    return np.array(off)


def center_peak(u: Field) -> Field:
    """Translate (by whole cells) so that the maximum sits at the origin."""
    idx = peak_index(u)
    shift = tuple(u.grid.M // 2 - i for i in idx)
    return Field(u.grid, np.roll(u.values, shift, axis=tuple(range(u.grid.N))))


def spectral_resample(u: Field, target: Grid) -> Field:
    """Move a field onto another grid.  Diagnostics only.

    Equal box lengths: exact band-limited zero padding / truncation.
    Different lengths: cubic-spline interpolation of the samples, periodic when
    the target box is smaller and zero-extended when it is larger.
    """
    g = u.grid
    if g.N != target.N:
        raise GridMismatch("dimension mismatch")
    if math.isclose(g.L, target.L, rel_tol=GRID_RTOL):
        M0, M1 = g.M, target.M
        if M0 == M1:
            return Field(target, u.values)
        full = sfft.fftshift(sfft.fftn(u.values))
        if M1 > M0:
            pad = (M1 - M0) // 2
            # split the Nyquist coefficient so the result stays real
            for j in range(g.N):
                sl = [slice(None)] * g.N
                sl[j] = 0
                nyq = full[tuple(sl)] / 2
                full = np.concatenate([np.expand_dims(nyq, j), full[tuple(
                    slice(1, None) if k == j else slice(None) for k in range(g.N))],
                    np.expand_dims(nyq, j)], axis=j)
            full = np.pad(full, [(pad, pad - 1)] * g.N)
        else:
            cut = (M0 - M1) // 2
            for j in range(g.N):
                # +M1/2 and -M1/2 alias on the coarse grid, so fold them together
                keep = np.take(full, np.arange(cut, cut + M1), axis=j)
                plus = np.take(full, [cut + M1], axis=j)
                first = np.take(keep, [0], axis=j) + plus
                full = np.concatenate([first, np.take(keep, np.arange(1, M1), axis=j)], axis=j)
        vals = sfft.ifftn(sfft.ifftshift(full)).real * (M1 / M0) ** g.N
        return Field(target, vals)
    pos = [(ax / g.h + g.M // 2) for ax in np.meshgrid(
        *([target.axis] * g.N), indexing="ij")]
    # a larger target box sees zeros beyond the source, not periodic copies
    mode = "grid-constant" if target.L > g.L else "grid-wrap"
    vals = ndimage.map_coordinates(u.values, pos, order=3, mode=mode, cval=0.0)
    return Field(target, vals)


def _half_weights(grid: Grid) -> np.ndarray:
    # multiplicity of each half-spectrum mode in the full real series
    n = grid.M // 2 + 1
    w = np.full(n, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    sh = [1] * grid.N
    sh[-1] = n
    return w.reshape(sh)


def subcell_peak(u: Field, iters: int = 20) -> np.ndarray:
    """Location of the maximum of the trigonometric interpolant of ``u``.

    Newton's method on the gradient, started at the largest sample.
    Returned in physical coordinates.
    """
    g = u.grid
    uh = rfft(g, u.values) * (_half_weights(g) / g.size)
    ks = g._kaxes
    y = np.array([(i) * g.h for i in peak_index(u)], dtype=float)
    for _ in range(iters):
        ph = np.ones((1,) * g.N, dtype=complex)
        for k, yj in zip(ks, y):
            ph = ph * np.exp(1j * k * yj)
        c = uh * ph
        grad = np.array([-float(np.sum((k * c).imag)) for k in ks])
        hess = np.array([[-float(np.sum((ki * kj * c).real)) for kj in ks] for ki in ks])
        try:
            dy = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        if np.max(np.abs(dy)) > g.h:
            dy = dy * (g.h / np.max(np.abs(dy)))
        y = y - dy
        if np.max(np.abs(dy)) < 1e-14 * g.L:
            break
    return y - (g.M // 2) * g.h


def translate(u: Field, shift) -> Field:
    """Exact band-limited translation: returns x -> u(x + shift)."""
    g = u.grid
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (g.N,))
    ph = np.ones((1,) * g.N, dtype=complex)
    for k, x0 in zip(g._kaxes, shift):
        ph = ph * np.exp(1j * k * x0)
    return Field(g, irfft(g, rfft(g, u.values) * ph))


def align_peak(u: Field, *others: Field, ref: Field | None = None):
    """Translate ``u`` (and ``others`` by the same amount) so the peak of
    ``ref`` (default ``u``) sits at the origin."""
    x0 = subcell_peak(u if ref is None else ref)
    out = tuple(translate(f, x0) for f in (u,) + others)
    return out[0] if not others else out
