"""Model layer: parameters, coefficient mapping, states, invariants.

The physical system couples a complex envelope B with two real fields
(rho, u):

    i dB/dt + omega B_xx = gamma (u - (nu/2) rho + q |B|^2) B
    theta d(rho)/dt + d/dx (u - nu rho) = -gamma d/dx |B|^2
    theta d(u)/dt  + d/dx (beta rho - nu u) = (gamma nu / 2) d/dx |B|^2

(the u-row source carries the factor nu: this is the unique choice under
which the quartic energy below is a constant of motion, checked numerically
to second order in dt for generic parameters).

with q = gamma + nu (gamma nu - 1) / (2 (beta - nu^2)).  The change of
variables

    rho = psi1 + psi2,      u = sqrt(beta) (psi1 - psi2)

decouples the left-hand transport part into two one-way wave operators, and
the solver integrates the resulting first-order system

    i dB/dt + dispersion B_xx
        = (potential_plus psi1 + potential_minus psi2 + cubic |B|^2) B
    d(psi1)/dt + speed_plus  d(psi1)/dx = source_plus  d/dx |B|^2
    d(psi2)/dt + speed_minus d(psi2)/dx = source_minus d/dx |B|^2

for an arbitrary coefficient record, of which the physical system, the unit
normalization, and the small-dispersion modified system are instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .grid import SpectralGrid

__all__ = [
    "PhysicalParams",
    "ExternalPotential",
    "GeneralCoefficients",
    "coefficients_from_params",
    "normalized_coefficients",
    "unit_physical_params",
    "modified_system_coefficients",
    "to_physical_vars",
    "from_physical_vars",
    "FieldState",
    "ConservedReport",
    "conserved_quantities",
    "plane_wave_state",
    "Schedule",
    "iteration_schedule",
]


@dataclass(frozen=True)
class PhysicalParams:
    """Constants (theta, gamma, omega, beta, nu) of the physical system.

    Constraints: theta != 0, beta > 0, beta - nu^2 != 0.  The cubic strength
    q is derived, never stored.
    """

    theta: float = 1.0
    gamma: float = 1.0
    omega: float = 1.0
    beta: float = 1.0
    nu: float = 0.0

    def __post_init__(self) -> None:
        vals = (self.theta, self.gamma, self.omega, self.beta, self.nu)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("physical parameters must be finite")
        if self.theta == 0.0:
            raise ValueError("theta must be nonzero")
        if self.beta <= 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.beta - self.nu**2 == 0.0:
            raise ValueError("beta - nu^2 must be nonzero")

    @property
    def q(self) -> float:
        return self.gamma + self.nu * (self.gamma * self.nu - 1.0) / (2.0 * (self.beta - self.nu**2))


@dataclass(frozen=True)
class ExternalPotential:
    """A frozen real profile advected at constant speed.

    Contributes profile(x - speed*t) to the potential seen by B.  The profile
    is sampled on the run grid; translation is exact (trigonometric).
    """

    profile: np.ndarray
    speed: float

    def __post_init__(self) -> None:
        prof = np.asarray(self.profile, dtype=np.float64)
        if prof.ndim != 1:
            raise ValueError("external potential profile must be one-dimensional")
        if not np.all(np.isfinite(prof)):
            raise ValueError("external potential profile contains non-finite entries")
        prof = prof.copy()
        prof.setflags(write=False)
        object.__setattr__(self, "profile", prof)


@dataclass(frozen=True)
class GeneralCoefficients:
    """Coefficient record for the first-order (B, psi1, psi2) system."""

    dispersion: float
    potential_plus: float
    potential_minus: float
    cubic: float
    speed_plus: float
    speed_minus: float
    source_plus: float
    source_minus: float
    external_plus: Optional[ExternalPotential] = None
    external_minus: Optional[ExternalPotential] = None

    def __post_init__(self) -> None:
        for name in ("dispersion", "potential_plus", "potential_minus", "cubic",
                     "speed_plus", "speed_minus", "source_plus", "source_minus"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"coefficient {name} must be finite")

    def with_externals(self, plus: Optional[ExternalPotential],
                       minus: Optional[ExternalPotential]) -> "GeneralCoefficients":
        return replace(self, external_plus=plus, external_minus=minus)


def coefficients_from_params(p: PhysicalParams) -> GeneralCoefficients:
    """Map physical constants to the general coefficient record.

    Derived by substituting rho = psi1 + psi2, u = sqrt(beta)(psi1 - psi2)
    into the physical system and dividing the transport rows by theta.
    """
    rb = math.sqrt(p.beta)
    return GeneralCoefficients(
        dispersion=p.omega,
        potential_plus=p.gamma * (rb - 0.5 * p.nu),
        potential_minus=-p.gamma * (rb + 0.5 * p.nu),
        cubic=p.gamma * p.q,
        speed_plus=(rb - p.nu) / p.theta,
        speed_minus=-(rb + p.nu) / p.theta,
        source_plus=(0.5 * p.gamma / p.theta) * (-1.0 + 0.5 * p.nu / rb),
        source_minus=(0.5 * p.gamma / p.theta) * (-1.0 - 0.5 * p.nu / rb),
    )


def normalized_coefficients() -> GeneralCoefficients:
    """Unit-coefficient preset:

        i dB/dt + B_xx = (psi1 + psi2 + |B|^2) B
        d(psi1)/dt + d(psi1)/dx = d/dx |B|^2
        d(psi2)/dt - d(psi2)/dx = d/dx |B|^2

    Not realizable from PhysicalParams (the two potential couplings carry the
    same sign); used directly by the frequency-sweep experiments.
    """
    return GeneralCoefficients(
        dispersion=1.0, potential_plus=1.0, potential_minus=1.0, cubic=1.0,
        speed_plus=1.0, speed_minus=-1.0, source_plus=1.0, source_minus=1.0,
    )


def unit_physical_params() -> PhysicalParams:
    """theta = gamma = omega = beta = 1, nu = 0; q collapses to 1."""
    return PhysicalParams(theta=1.0, gamma=1.0, omega=1.0, beta=1.0, nu=0.0)


def modified_system_coefficients(mu: float, big_l: float, c: float,
                                 theta_sq: float) -> GeneralCoefficients:
    """Small-dispersion modified system used by the decoherence experiment.

        i dB/dt + mu^2 B_xx = (psi_ext + psi1 + psi2 + theta_sq |B|^2) B
        d(psi1)/dt + (mu(1-c)/L) d(psi1)/dx = (theta_sq mu / L) d/dx |B|^2
        d(psi2)/dt - (mu(1+c)/L) d(psi2)/dx = (theta_sq mu / L) d/dx |B|^2

    External potential profiles are attached separately (they advect at the
    corresponding transport speeds).
    """
    if not (0.0 < mu < 1.0):
        raise ValueError(f"mu must lie in (0, 1), got {mu}")
    if not (0.0 < c < 1.0):
        raise ValueError(f"c must lie in (0, 1), got {c}")
    if big_l <= 0.0:
        raise ValueError("scale parameter must be positive")
    return GeneralCoefficients(
        dispersion=mu**2,
        potential_plus=1.0,
        potential_minus=1.0,
        cubic=theta_sq,
        speed_plus=mu * (1.0 - c) / big_l,
        speed_minus=-mu * (1.0 + c) / big_l,
        source_plus=theta_sq * mu / big_l,
        source_minus=theta_sq * mu / big_l,
    )


# -- change of variables -----------------------------------------------------

def to_physical_vars(psi1: np.ndarray, psi2: np.ndarray, beta: float):
    """(psi1, psi2) -> (rho, u)."""
    rb = math.sqrt(beta)
    return psi1 + psi2, rb * (psi1 - psi2)


def from_physical_vars(rho: np.ndarray, u: np.ndarray, beta: float):
    """(rho, u) -> (psi1, psi2); exact inverse of to_physical_vars."""
    rb = math.sqrt(beta)
    return 0.5 * (rho + u / rb), 0.5 * (rho - u / rb)


# -- state -------------------------------------------------------------------

@dataclass
class FieldState:
    """Solver state: complex B and real psi1, psi2 on a shared grid."""

    grid: SpectralGrid
    b: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        self.b = np.asarray(self.b, dtype=np.complex128).copy()
        self.psi1 = self._realize(self.psi1)
        self.psi2 = self._realize(self.psi2)
        for arr in (self.b, self.psi1, self.psi2):
            if arr.shape != (self.grid.n,):
                raise ValueError(f"field shape {arr.shape} does not match grid size {self.grid.n}")
        self.check_finite()

    def _realize(self, arr: np.ndarray) -> np.ndarray:
        arr = np.asarray(arr)
        if np.iscomplexobj(arr):
            scale = max(1.0, float(np.max(np.abs(arr))) if arr.size else 1.0)
            leak = float(np.max(np.abs(arr.imag)))
            if leak > 1e-12 * scale:
                raise ValueError(f"psi field imaginary residue {leak:.3e} exceeds budget")
            arr = arr.real
        return np.asarray(arr, dtype=np.float64).copy()

    def check_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.b)) and np.all(np.isfinite(self.psi1))
                    and np.all(np.isfinite(self.psi2)))

    def copy(self) -> "FieldState":
        return FieldState(self.grid, self.b.copy(), self.psi1.copy(), self.psi2.copy(), self.time)


@dataclass(frozen=True)
class ConservedReport:
    """Snapshot of the four invariants and the monitored Sobolev norms."""

    q1: float
    q2: float
    q3: float
    q4: float
    b_norms: dict[float, float] = field(default_factory=dict)
    psi1_norm: float = 0.0
    psi2_norm: float = 0.0


def conserved_quantities(state: FieldState, params: PhysicalParams,
                         s_list: tuple[float, ...] = (1.0,),
                         psi_index: float = -0.5) -> ConservedReport:
    """Evaluate the four invariants of the physical system.

        Q1 = int |B|^2
        Q3 = int u rho + P,  P = (i/2) int (B conj(B)_x - B_x conj(B))
        Q4 = (omega/2) int |B_x|^2 + (gamma q / 4) int |B|^4
             + (gamma/2) int (u - (nu/2) rho) |B|^2
             + (beta/4) int rho^2 + (1/4) int u^2 + (nu / 2 theta) P
        Q2 = Q4 - (nu / 2 theta) Q3

    Integrals are dx-weighted sums (spectrally accurate on the torus); B_x is
    the spectral derivative.  psi1, psi2 are converted back to (rho, u) with
    the record's beta.
    """
    g = state.grid
    dx = g.dx
    rho, u = to_physical_vars(state.psi1, state.psi2, params.beta)
    b = state.b
    bx = g.derivative(b, 1)
    absb2 = np.abs(b) ** 2

    q1 = dx * float(np.sum(absb2))
    momentum = dx * float(np.sum(np.imag(np.conj(b) * bx)))
    q3 = dx * float(np.sum(u * rho)) + momentum
    q4 = (0.5 * params.omega * dx * float(np.sum(np.abs(bx) ** 2))
          + 0.25 * params.gamma * params.q * dx * float(np.sum(absb2**2))
          + 0.5 * params.gamma * dx * float(np.sum((u - 0.5 * params.nu * rho) * absb2))
          + 0.25 * params.beta * dx * float(np.sum(rho**2))
          + 0.25 * dx * float(np.sum(u**2))
          + 0.5 * params.nu / params.theta * momentum)
    q2 = q4 - 0.5 * params.nu / params.theta * q3

    b_hat = g.forward(b)
    norms = {float(s): g.sobolev_norm_coeffs(b_hat, s) for s in s_list}
    return ConservedReport(
        q1=q1, q2=q2, q3=q3, q4=q4, b_norms=norms,
        psi1_norm=g.sobolev_norm(state.psi1, psi_index),
        psi2_norm=g.sobolev_norm(state.psi2, psi_index),
    )


def plane_wave_state(grid: SpectralGrid, coeffs: GeneralCoefficients,
                     amplitude: float, kappa: float,
                     c1: float = 0.0, c2: float = 0.0) -> tuple[FieldState, float]:
    """Exact plane-wave solution B = A exp(i(kappa x - Omega t)), psi constant.

    kappa must be a grid wavenumber.  Substituting into the B equation with
    constant potentials V = potential_plus*c1 + potential_minus*c2 + cubic*A^2
    gives

        Omega = dispersion * kappa^2 + V

    (constant psi fields advect trivially and |B|^2 is x-independent, so the
    psi equations hold with both sides zero).  Returns the t = 0 state and
    Omega.
    """
    j = kappa * grid.length / (2.0 * np.pi)
    if abs(j - round(j)) > 1e-9:
        raise ValueError(f"kappa = {kappa} is not a grid wavenumber (mode index {j:.6f})")
    if not (-grid.n / 2 <= round(j) < grid.n / 2):
        raise ValueError(f"kappa = {kappa} lies outside the resolved band")
    b = amplitude * np.exp(1j * kappa * grid.x)
    psi1 = np.full(grid.n, c1)
    psi2 = np.full(grid.n, c2)
    v = coeffs.potential_plus * c1 + coeffs.potential_minus * c2 + coeffs.cubic * amplitude**2
    omega_freq = coeffs.dispersion * kappa**2 + v
    return FieldState(grid, b, psi1, psi2, 0.0), omega_freq


@dataclass(frozen=True)
class Schedule:
    """Local-step estimate: step size, step count, and covered horizon."""

    dt: float
    steps: int

    @property
    def horizon(self) -> float:
        return self.dt * self.steps


def iteration_schedule(norm_psi1: float, norm_psi2: float, norm_b0: float,
                       eps: float = 0.01) -> Schedule:
    """Local-existence iteration budget implied by the data sizes.

    dT = min(||psi1||, ||psi2||)^(-1/(1/2 - 3 eps)) clamped to (0, 1], and
    m = ceil(min_norm / (dT^(1/2-3eps) ||B0||^2)) steps, so that the covered
    horizon m*dT scales like ||B0||^{-2}.  Degenerate zero-psi data get the
    unit budget (1.0, 1).
    """
    if min(norm_psi1, norm_psi2, norm_b0) < 0:
        raise ValueError("norms must be nonnegative")
    if not 0 <= eps < 1.0 / 6.0:
        raise ValueError(f"eps must lie in [0, 1/6), got {eps}")
    exponent = 0.5 - 3.0 * eps
    min_norm = min(norm_psi1, norm_psi2)
    if min_norm == 0.0 or norm_b0 == 0.0:
        return Schedule(dt=1.0, steps=1)
    dt = min(1.0, min_norm ** (-1.0 / exponent))
    m = max(1, math.ceil(min_norm / (dt**exponent * norm_b0**2)))
    return Schedule(dt=dt, steps=m)
