"""Closed-form references computed independently of the PDE solver.

Everything here works in continuous frequency with Gauss-Legendre quadrature
(panels split at the kinks of indicator-overlap functions), so comparisons
against the spectral solver are genuine cross-validations.

Fourier/norm conventions on the line:

    fhat(xi) = int f(x) exp(-i x xi) dx
    ||f||_{H^s} = sqrt( int (1+|xi|)^{2s} |fhat(xi)|^2 dxi )

With these, H^0 is sqrt(2*pi) times the physical L^2 norm; a band-limited
function synthesized on a periodic grid via c_j = fhat(xi_j)/L therefore has
grid Sobolev norm equal to the hat-integral norm divided by sqrt(2*pi).
`as_grid_norm` applies that bridge; it is the only place the constant lives.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .grid import ComplexField, SpectralGrid

__all__ = [
    "HatDatum",
    "build_fN",
    "build_c2_psi10",
    "hat_sobolev_norm",
    "normalize_hats",
    "synthesize_hat_field",
    "as_grid_norm",
    "resonance_phi",
    "l_hat",
    "l_hat_norm",
    "l_hat_time_quadrature",
    "first_order_psi1",
    "first_order_psi1_time_quadrature",
    "small_dispersion_solution",
    "scaling_embed",
    "trig_interpolate",
    "smooth_plateau",
    "modulated_sinc",
]

GRID_NORM_FACTOR = 1.0 / math.sqrt(2.0 * math.pi)


def as_grid_norm(hat_norm_value: float) -> float:
    """Convert a hat-integral norm to the equivalent grid-norm value."""
    return hat_norm_value * GRID_NORM_FACTOR


@lru_cache(maxsize=None)
def _gl(nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


# -- hat data -----------------------------------------------------------------

@dataclass(frozen=True)
class HatDatum:
    """An indicator bump in frequency: amplitude * chi_[lo, hi]."""

    lo: float
    hi: float
    amplitude: float
    tag: str = ""

    def __post_init__(self) -> None:
        if not (self.lo < self.hi):
            raise ValueError(f"empty hat support [{self.lo}, {self.hi}]")
        if not all(math.isfinite(v) for v in (self.lo, self.hi, self.amplitude)):
            raise ValueError("hat parameters must be finite")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def build_fN(n_freq: int, k: float, variant: str = "inflation_f") -> tuple[HatDatum, ...]:
    """Two-sided (or single) frequency bumps with amplitude N^{1/2-k}.

    variant:
      inflation_f : chi_[-N-1/N, -N] + chi_[N+1, N+1+1/N]
                    (resonant with the speed +1 transport field)
      inflation_g : chi_[-N-1/N, -N] + chi_[N-1, N-1+1/N]
                    (resonant with the speed -1 transport field)
      c2_B0       : chi_[0, 1/N]   (single bump at the origin)
    """
    if n_freq < 2:
        raise ValueError(f"N must be >= 2, got {n_freq}")
    big_n = float(n_freq)
    amp = big_n ** (0.5 - k)
    if variant == "inflation_f":
        return (HatDatum(-big_n - 1.0 / big_n, -big_n, amp, "fA"),
                HatDatum(big_n + 1.0, big_n + 1.0 + 1.0 / big_n, amp, "fB"))
    if variant == "inflation_g":
        return (HatDatum(-big_n - 1.0 / big_n, -big_n, amp, "gA"),
                HatDatum(big_n - 1.0, big_n - 1.0 + 1.0 / big_n, amp, "gB"))
    if variant == "c2_B0":
        return (HatDatum(0.0, 1.0 / big_n, amp, "B0"),)
    raise ValueError(f"unknown hat variant {variant!r}")


def build_c2_psi10(n_freq: int, l: float) -> tuple[HatDatum, ...]:
    """Transport-field bump chi_[-1/N, 1/N] with amplitude N^{1/2-l}."""
    if n_freq < 2:
        raise ValueError(f"N must be >= 2, got {n_freq}")
    big_n = float(n_freq)
    return (HatDatum(-1.0 / big_n, 1.0 / big_n, big_n ** (0.5 - l), "psi10"),)


def _check_disjoint(hats: Sequence[HatDatum]) -> None:
    spans = sorted((h.lo, h.hi) for h in hats)
    for (a, b), (c, d) in zip(spans, spans[1:]):
        if c < b:
            raise ValueError("hat supports overlap")


def hat_sobolev_norm(hats: Sequence[HatDatum], s: float, nodes: int = 64) -> float:
    """Hat-integral H^s norm of a sum of disjoint hats, by quadrature.

    Hats straddling the origin are split there: the weight (1+|xi|)^{2s} has
    a kink at 0 that would otherwise stall Gauss-Legendre convergence."""
    _check_disjoint(hats)
    x, w = _gl(nodes)
    total = 0.0
    for h in hats:
        for a, b in _panels((h.lo, h.hi, 0.0) if h.lo < 0.0 < h.hi else (h.lo, h.hi)):
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            xi = mid + half * x
            total += h.amplitude**2 * half * float(np.sum(w * (1.0 + np.abs(xi)) ** (2.0 * s)))
    return math.sqrt(total)


def normalize_hats(hats: Sequence[HatDatum], s: float, nodes: int = 64) -> tuple[HatDatum, ...]:
    """Rescale amplitudes so the hat-integral H^s norm is exactly 1."""
    norm = hat_sobolev_norm(hats, s, nodes)
    if norm == 0.0:
        raise ValueError("cannot normalize zero data")
    return tuple(HatDatum(h.lo, h.hi, h.amplitude / norm, h.tag) for h in hats)


def synthesize_hat_field(grid: SpectralGrid, hats: Sequence[HatDatum]) -> ComplexField:
    """Sample hat data onto the periodic grid: c_j = fhat(xi_j) / L.

    Supports are half-open [lo, hi) so that aligned hats contain an exact
    number of grid cells.  The resulting grid function approximates the
    line function with Fourier transform sum_h amp_h chi_[lo,hi); its grid
    Sobolev norm converges to as_grid_norm(hat_sobolev_norm(...)).
    """
    coeffs = np.zeros(grid.n, dtype=np.complex128)
    xi = grid.wavenumbers
    for h in hats:
        sel = (xi >= h.lo) & (xi < h.hi)
        if not np.any(sel):
            raise ValueError(
                f"hat [{h.lo}, {h.hi}) contains no grid frequencies (L too small)")
        coeffs[sel] += h.amplitude / grid.length
    if not np.all(np.abs(xi[np.abs(coeffs) > 0]) <= np.max(np.abs(xi[grid.dealias_mask]))):
        raise ValueError("hat support extends beyond the dealiased band")
    return ComplexField(grid, grid.inverse(coeffs))


# -- resonance kernel ----------------------------------------------------------

def resonance_phi(t: float, a) -> np.ndarray:
    """phi(t, a) = (exp(i t a) - 1) / (i a), the oscillatory time integral
    int_0^t exp(i t' a) dt'.

    For |t a| < 1e-6 the three-term series t (1 + i t a / 2 - (t a)^2 / 6)
    is used; phi(t, 0) = t and |phi| <= |t| everywhere.
    """
    a = np.asarray(a, dtype=np.float64)
    ta = t * a
    small = np.abs(ta) < 1e-6
    a_safe = np.where(small, 1.0, a)
    exact = (np.exp(1j * ta) - 1.0) / (1j * a_safe)
    series = t * (1.0 + 0.5j * ta - ta**2 / 6.0)
    return np.where(small, series, exact)


def _phi_time_quadrature(t: float, a: np.ndarray, nodes: int) -> np.ndarray:
    """Brute-force GL quadrature of int_0^t exp(i t' a) dt' (dual route)."""
    x, w = _gl(nodes)
    tp = 0.5 * t * (x + 1.0)
    return 0.5 * t * np.tensordot(np.exp(1j * np.multiply.outer(a, tp)), w, axes=([-1], [0]))


# -- second-derivative (bilinear) kernel ---------------------------------------

def _pair_interval(b0: HatDatum, psi: HatDatum, xi: np.ndarray):
    """Integration interval in xi_1: supp(B0hat) cap (xi - supp(psihat))."""
    lo = np.maximum(b0.lo, xi - psi.hi)
    hi = np.minimum(b0.hi, xi - psi.lo)
    return lo, hi


def l_hat(xi, t: float, b0: HatDatum, psi10: HatDatum, nodes: int = 64) -> np.ndarray:
    """Bilinear Duhamel kernel

        Lhat(xi, t) = exp(-i t xi^2) *
            int B0hat(xi_1) psi10hat(xi - xi_1) phi(t, a) d xi_1,
        a = (xi - xi_1)(xi + xi_1 - 1),

    i.e. the second derivative (in the data pair) of the solution map at zero,
    under the free Schrodinger phase exp(-i t' xi^2) for B and the speed +1
    transport phase exp(-i t' xi) for the coupling field.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    lo, hi = _pair_interval(b0, psi10, xi)
    half = np.maximum(0.0, 0.5 * (hi - lo))
    mid = 0.5 * (lo + hi)
    x, w = _gl(nodes)
    xi1 = mid[:, None] + half[:, None] * x[None, :]
    a = (xi[:, None] - xi1) * (xi[:, None] + xi1 - 1.0)
    inner = np.sum(w[None, :] * resonance_phi(t, a), axis=1) * half
    return np.exp(-1j * t * xi**2) * b0.amplitude * psi10.amplitude * inner


def l_hat_time_quadrature(xi, t: float, b0: HatDatum, psi10: HatDatum,
                          nodes: int = 64, time_nodes: int = 64) -> np.ndarray:
    """Same kernel with the t' integral done by brute-force quadrature:

        int_0^t exp(-i (t-t') xi^2) exp(-i t' xi_1^2)
                exp(-i t' (xi - xi_1)) dt'

    Independent of the resonance_phi closed form."""
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    lo, hi = _pair_interval(b0, psi10, xi)
    half = np.maximum(0.0, 0.5 * (hi - lo))
    mid = 0.5 * (lo + hi)
    x, w = _gl(nodes)
    xi1 = mid[:, None] + half[:, None] * x[None, :]
    a = (xi[:, None] - xi1) * (xi[:, None] + xi1 - 1.0)
    inner = np.sum(w[None, :] * _phi_time_quadrature(t, a, time_nodes), axis=1) * half
    return np.exp(-1j * t * xi**2) * b0.amplitude * psi10.amplitude * inner


def _panels(breaks: Sequence[float]) -> list[tuple[float, float]]:
    pts = sorted(set(float(b) for b in breaks))
    return [(a, b) for a, b in zip(pts, pts[1:]) if b - a > 0.0]


def l_hat_norm(t: float, b0: HatDatum, psi10: HatDatum, k: float,
               nodes: int = 64, time_quadrature: bool = False) -> float:
    """||L(.,t)||_{H^k} in the hat-integral convention.

    The output support is [b0.lo + psi10.lo, b0.hi + psi10.hi]; the overlap
    length is piecewise linear with kinks at the two interior corners, so the
    outer integral is split there (and at 0, where the weight kinks)."""
    breaks = [b0.lo + psi10.lo, b0.lo + psi10.hi, b0.hi + psi10.lo, b0.hi + psi10.hi]
    if breaks[0] < 0.0 < breaks[-1]:
        breaks.append(0.0)
    x, w = _gl(nodes)
    total = 0.0
    for a, b in _panels(breaks):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        xi = mid + half * x
        if time_quadrature:
            vals = l_hat_time_quadrature(xi, t, b0, psi10, nodes)
        else:
            vals = l_hat(xi, t, b0, psi10, nodes)
        total += half * float(np.sum(w * (1.0 + np.abs(xi)) ** (2.0 * k) * np.abs(vals) ** 2))
    return math.sqrt(total)


# -- first-order transport response ---------------------------------------------

def _psi1_hat_sq_integrand(xi: np.ndarray, t: float, hats: Sequence[HatDatum],
                           speed: float, source: float, nodes: int,
                           time_nodes: int = 0) -> np.ndarray:
    """|psi1hat(xi, t)|^2 for the first Duhamel iterate

        psi1hat(xi, t) = source * (i xi) exp(-i speed t xi) * (1/2pi) *
            sum_pairs int fhat_i(xi_1) conj(fhat_j(xi_1 - xi))
                          phi(t, xi (xi - 2 xi_1 + speed)) d xi_1

    of d(psi)/dt + speed d(psi)/dx = source d/dx |exp(i t d_xx) f|^2."""
    x, w = _gl(nodes)
    acc = np.zeros(xi.shape, dtype=np.complex128)
    for hi_hat in hats:
        for hj_hat in hats:
            lo = np.maximum(hi_hat.lo, xi + hj_hat.lo)
            hi = np.minimum(hi_hat.hi, xi + hj_hat.hi)
            half = 0.5 * (hi - lo)
            live = half > 0.0
            if not np.any(live):
                continue
            half = np.where(live, half, 0.0)
            mid = 0.5 * (lo + hi)
            xi1 = mid[:, None] + half[:, None] * x[None, :]
            a = xi[:, None] * (xi[:, None] - 2.0 * xi1 + speed)
            if time_nodes:
                phi = _phi_time_quadrature(t, a, time_nodes)
            else:
                phi = resonance_phi(t, a)
            acc += hi_hat.amplitude * hj_hat.amplitude * half * np.sum(w[None, :] * phi, axis=1)
    return (np.abs(xi) * np.abs(acc) / (2.0 * np.pi)) ** 2 * source**2


def _first_order_psi1_impl(t: float, hats: Sequence[HatDatum], l: float,
                           speed: float, source: float, nodes: int,
                           time_nodes: int) -> float:
    _check_disjoint(hats)
    breaks: list[float] = []
    for hi_hat in hats:
        for hj_hat in hats:
            breaks += [hi_hat.lo - hj_hat.hi, hi_hat.lo - hj_hat.lo,
                       hi_hat.hi - hj_hat.hi, hi_hat.hi - hj_hat.lo]
    if min(breaks) < 0.0 < max(breaks):
        breaks.append(0.0)  # weight kink
    x, w = _gl(nodes)
    total = 0.0
    for a, b in _panels(breaks):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        xi = mid + half * x
        sq = _psi1_hat_sq_integrand(xi, t, hats, speed, source, nodes, time_nodes)
        total += half * float(np.sum(w * (1.0 + np.abs(xi)) ** (2.0 * l) * sq))
    return math.sqrt(total)


def first_order_psi1(t: float, hats: Sequence[HatDatum], l: float,
                     speed: float = 1.0, source: float = 1.0,
                     nodes: int = 64) -> float:
    """Hat-integral H^l norm of the first-order transport response at time t.

    This is the continuum, whole-line oracle for the solver's psi field when
    the envelope data is the hat sum and couplings are at first order.  Use
    as_grid_norm(...) when comparing against grid Sobolev norms."""
    return _first_order_psi1_impl(t, hats, l, speed, source, nodes, time_nodes=0)


def first_order_psi1_time_quadrature(t: float, hats: Sequence[HatDatum], l: float,
                                     speed: float = 1.0, source: float = 1.0,
                                     nodes: int = 64, time_nodes: int = 64) -> float:
    """Dual route: the oscillatory time integral by brute-force quadrature."""
    return _first_order_psi1_impl(t, hats, l, speed, source, nodes, time_nodes=time_nodes)


# -- small-dispersion closed form -----------------------------------------------

def small_dispersion_solution(b0: ComplexField, psi_plus0: np.ndarray,
                              psi_minus0: np.ndarray, t: float) -> ComplexField:
    """Zero-dispersion phase solution

        A(x, t) = exp(-i t (psi_plus0(x) + psi_minus0(x))) * B0(x),

    the limit profile the modified small-dispersion system tracks to O(mu).
    |A| = |B0| pointwise, so every L^2-type norm of the modulus is preserved.
    """
    phase = np.exp(-1j * t * (np.asarray(psi_plus0) + np.asarray(psi_minus0)))
    return ComplexField(b0.grid, phase * b0.values)


def trig_interpolate(grid: SpectralGrid, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate the band-limited interpolant sum_j c_j exp(i xi_j y) at
    arbitrary points (periodic in the grid length)."""
    coeffs = grid.forward(values)
    points = np.asarray(points, dtype=np.float64)
    out = np.zeros(points.shape, dtype=np.complex128)
    chunk = max(1, 2**22 // grid.n)
    flat = points.ravel()
    res = out.ravel()
    for start in range(0, flat.size, chunk):
        y = flat[start:start + chunk]
        res[start:start + chunk] = np.exp(1j * np.multiply.outer(y, grid.wavenumbers)) @ coeffs
    return out


def scaling_embed(btilde: ComplexField, t_big: float, big_l: float, mu: float,
                  theta: float, c: float, x_out: np.ndarray) -> np.ndarray:
    """Map a rescaled-frame field into original variables:

        B(x, t) = L Theta exp(-i c^2 t) exp(i c x) Btilde(L mu (x - c t), L^2 t).

    `btilde` must hold the rescaled solution at internal time L^2 * t_big.
    The L^2 norms satisfy ||B(., t)|| = sqrt(L) Theta / sqrt(mu) ||Btilde||.
    Mapped coordinates outside the btilde domain wrap periodically (warned).
    """
    x_out = np.asarray(x_out, dtype=np.float64)
    y = big_l * mu * (x_out - c * t_big)
    half = 0.5 * btilde.grid.length
    if np.any(np.abs(y) > half):
        warnings.warn("scaling embed samples the periodic extension of the "
                      "rescaled field (mapped coordinate outside its domain)",
                      RuntimeWarning)
    vals = trig_interpolate(btilde.grid, btilde.values, y)
    return big_l * theta * np.exp(-1j * c**2 * t_big) * np.exp(1j * c * x_out) * vals


# -- reference profiles -----------------------------------------------------------

def smooth_plateau(x: np.ndarray, inner: float = 1.0, outer: float = 2.0) -> np.ndarray:
    """C-infinity plateau: 1 on |x| <= inner, 0 on |x| >= outer, with the
    standard exp(-1/s) partition-of-unity transition in between."""
    if not 0 < inner < outer:
        raise ValueError("need 0 < inner < outer")
    x = np.asarray(x, dtype=np.float64)
    y = (np.abs(x) - inner) / (outer - inner)  # transition coordinate in [0, 1]
    y = np.clip(y, 0.0, 1.0)

    def f(s):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(s > 0.0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)

    num = f(1.0 - y)
    return num / (num + f(y))


def modulated_sinc(x: np.ndarray) -> np.ndarray:
    """cos(3x) sin(x)/x with the removable singularity filled in (value 1)."""
    x = np.asarray(x, dtype=np.float64)
    return np.cos(3.0 * x) * np.sinc(x / np.pi)
