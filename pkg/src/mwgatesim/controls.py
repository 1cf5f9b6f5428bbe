"""Trap/atom parameters and construction of the complete control program.

A control program fixes the bichromatic drive (Rabi amplitude Omega at
detuning delta), the slow gate detuning xi closing n phase-space loops, a
resonant carrier of amplitude Omega_DD with n_PF sign flips, the phase
modulation applied to all drives, and the two refocusing pi pulses.  The
commensurability rules tie everything to one clock:

* xi = delta/N = nu/(N-1) for integer N >= 2, so the bichromatic frame
  returns to the ion frame at the gate time t_gate = 2*pi*n/xi.
* The effective carrier frequency must satisfy eff_dd * t_gate = 2*pi*m.
* Every interval between carrier sign flips must hold an integer number
  of effective carrier periods, and (with phase modulation on) an integer
  number of half periods pi/delta of the modulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import constants as const
from .bessel import bessel_j
from .qops import HilbertLayout


class ScheduleError(ValueError):
    """Raised when no control schedule satisfies the requested constraints."""


@dataclass(frozen=True)
class PhysicalParams:
    """Trap and atom constants from which the coupling strengths derive."""

    nu: float                      # axial trap angular frequency (rad/s)
    g_B: float                     # magnetic gradient (T/m)
    mass: float = const.YB171_MASS_KG
    gamma_e: float = const.GAMMA_E  # gyromagnetic factor (rad/s/T)
    omega_0: float = const.TWO_PI * 12.6e9  # hyperfine splitting (rad/s)
    n_cm: int = 15                 # center-of-mass mode truncation
    n_br: int = 5                  # breathing mode truncation
    nbar0: float = 1.0             # initial thermal occupation of both modes

    def __post_init__(self):
        if self.nu <= 0 or self.mass <= 0 or self.gamma_e <= 0:
            raise ScheduleError("frequencies, mass and gamma_e must be positive")
        if self.n_cm < 2 or self.n_br < 2:
            raise ScheduleError("mode truncations must be >= 2")
        if self.nbar0 < 0:
            raise ScheduleError("initial occupation must be >= 0")

    @property
    def layout(self) -> HilbertLayout:
        return HilbertLayout((2, 2, self.n_cm, self.n_br))

    @property
    def reduced_layout(self) -> HilbertLayout:
        return HilbertLayout((2, 2, self.n_cm))


def lamb_dicke(p: PhysicalParams) -> float:
    """Gradient-induced qubit-motion coupling (gamma_e g_B / 8 nu) sqrt(hbar/(M nu))."""
    return (p.gamma_e * p.g_B / (8.0 * p.nu)) * math.sqrt(
        const.HBAR / (p.mass * p.nu)
    )


def ion_spacing(p: PhysicalParams) -> float:
    """Equilibrium separation of two ions in the harmonic trap (m)."""
    e2 = const.ELEMENTARY_CHARGE**2 / (4.0 * math.pi * const.EPSILON_0)
    return (2.0 * e2 / (p.mass * p.nu**2)) ** (1.0 / 3.0)


def qubit_splitting(p: PhysicalParams) -> float:
    """Qubit frequency difference (rad/s) across the two-ion spacing."""
    return 0.5 * p.gamma_e * p.g_B * ion_spacing(p)


@dataclass(frozen=True)
class ControlSchedule:
    """The complete control program for one gate."""

    omega: float                   # bichromatic Rabi amplitude (rad/s)
    delta: float                   # bichromatic detuning (rad/s)
    xi: float                      # gate detuning (rad/s), xi = delta/N
    big_n: int                     # integer N with xi = nu/(N-1)
    n_loops: int                   # phase-space loops closed by the gate
    t_gate: float                  # total gate time (s)
    omega_dd: float                # carrier amplitude (rad/s)
    eff_dd: float                  # effective carrier in the dressed frame (rad/s)
    n_pf: int                      # number of carrier sign flips
    flip_times: tuple[float, ...]  # strictly increasing, inside (0, t_gate)
    pi_pulse_times: tuple[float, ...]  # (t_gate/2, t_gate)
    phase_amplitude: float         # peak of the drive phase modulation (rad)
    eta: float                     # Lamb-Dicke parameter of the schedule
    nu: float                      # trap frequency the schedule was built for
    phase_modulated: bool = True

    @property
    def drive_ratio(self) -> float:
        """Jacobi-Anger argument 2*Omega/delta."""
        return 2.0 * self.omega / self.delta

    @property
    def j0(self) -> float:
        return bessel_j(0, self.drive_ratio)

    @property
    def j1(self) -> float:
        return bessel_j(1, self.drive_ratio)

    def segment_bounds(self) -> np.ndarray:
        return np.array((0.0,) + self.flip_times + (self.t_gate,))


def effective_dd(omega_dd: float, omega: float, delta: float) -> float:
    """Effective carrier amplitude J0*Omega_DD*(1 + 2 J1^2/J0^2)."""
    if delta <= 0:
        raise ScheduleError("delta must be positive")
    x = 2.0 * omega / delta
    j0 = bessel_j(0, x)
    j1 = bessel_j(1, x)
    return j0 * omega_dd * (1.0 + 2.0 * j1**2 / j0**2)


def _dd_conversion(omega: float, delta: float) -> float:
    x = 2.0 * omega / delta
    j0 = bessel_j(0, x)
    j1 = bessel_j(1, x)
    return j0 * (1.0 + 2.0 * j1**2 / j0**2)


def gate_angle(s: ControlSchedule) -> float:
    """Accumulated two-qubit phase after n closed loops.

    Uses the exact first-order sideband coupling eta*nu*J1(2 Omega/delta);
    the small-argument form 2 pi n eta^2 Omega^2 / xi^2 follows from
    J1(x) ~ x/2 and delta ~ nu.
    """
    g = s.eta * s.nu * s.j1
    return 2.0 * math.pi * s.n_loops * g**2 / s.xi**2


def gate_angle_small_x(s: ControlSchedule) -> float:
    """Small-argument approximation 2 pi n eta^2 Omega^2 / xi^2."""
    return 2.0 * math.pi * s.n_loops * (s.eta * s.omega) ** 2 / s.xi**2


def _segment_divisor(n_loops: int, n_pf: int, phase_modulated: bool) -> int:
    """Smallest g such that N being a multiple of g makes every inter-flip
    interval an integer number of modulation half-periods pi/delta."""
    if not phase_modulated or n_pf < 1:
        return 1
    q = n_pf + 1
    return q // math.gcd(q, 2 * n_loops)


def dd_grid_spacing(s: ControlSchedule) -> float:
    """Spacing of admissible effective-carrier values, (n_PF+1) xi / n."""
    return (s.n_pf + 1) * s.xi / s.n_loops


def valid_dd_amplitudes(s: ControlSchedule, lo: float, hi: float) -> np.ndarray:
    """Feasible carrier amplitudes Omega_DD with lo <= Omega_DD <= hi.

    Feasible means the effective carrier completes an integer number of
    periods in each of the (n_PF+1) inter-flip segments.
    """
    if hi <= lo:
        raise ScheduleError("empty amplitude range")
    conv = _dd_conversion(s.omega, s.delta)
    spacing = dd_grid_spacing(s)
    k_lo = max(1, math.ceil(lo * conv / spacing - 1e-9))
    k_hi = math.floor(hi * conv / spacing + 1e-9)
    if k_hi < k_lo:
        return np.array([])
    return np.arange(k_lo, k_hi + 1) * spacing / conv


def flip_sign(t, flip_times) -> np.ndarray:
    """Carrier sign f(t): +1 before the first flip, alternating afterwards.

    At a flip time itself the post-flip sign applies.
    """
    t = np.asarray(t, dtype=float)
    n_before = np.searchsorted(np.asarray(flip_times), t, side="right")
    return np.where(n_before % 2 == 0, 1.0, -1.0)


def phase_modulation(t, s: ControlSchedule):
    """Signed drive phase f(t) * phi(t) with phi(t) = phi_m sin^2(delta t / 2)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -1e-15) or np.any(t_arr > s.t_gate * (1 + 1e-12)):
        raise ScheduleError("time outside the gate window")
    phi = s.phase_amplitude * np.sin(0.5 * s.delta * t_arr) ** 2
    out = flip_sign(t_arr, s.flip_times) * phi
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(out)
    return out


def solve_schedule(
    p: PhysicalParams,
    omega_target: float,
    n_loops: int,
    n_pf: int,
    omega_dd_target: float,
    theta_target: float,
    phase_modulated: bool = True,
) -> ControlSchedule:
    """Solve the commensurability constraints around the requested drive.

    The trap frequency is fixed hardware, so after the integer roundings
    the Rabi amplitude Omega absorbs the adjustment that restores the
    requested gate angle, and the carrier snaps to the nearest value on
    the feasible grid.
    """
    if omega_target <= 0:
        raise ScheduleError("omega_target must be positive")
    if n_loops < 1 or n_pf < 0:
        raise ScheduleError("need n_loops >= 1 and n_pf >= 0")
    if not 0.0 < theta_target < 0.5 * math.pi:
        raise ScheduleError("theta_target must lie in (0, pi/2)")

    eta = lamb_dicke(p)
    if eta == 0:
        raise ScheduleError("zero Lamb-Dicke parameter; no gate coupling")

    # Small-argument seed for the gate detuning, then snap N to the grid
    # compatible with the flip-segment constraints.
    xi0 = omega_target * eta * math.sqrt(2.0 * math.pi * n_loops / theta_target)
    g_div = _segment_divisor(n_loops, n_pf, phase_modulated)
    n_raw = p.nu / xi0 + 1.0
    big_n = g_div * max(1, round(n_raw / g_div))
    if big_n < 2:
        big_n = g_div * math.ceil(2.0 / g_div)
    xi = p.nu / (big_n - 1)
    delta = xi * big_n
    t_gate = 2.0 * math.pi * n_loops / xi

    # Back-solve Omega against the exact gate angle by fixed point.
    omega = omega_target
    for _ in range(20):
        g = eta * p.nu * bessel_j(1, 2.0 * omega / delta)
        theta = 2.0 * math.pi * n_loops * g**2 / xi**2
        if abs(theta - theta_target) <= 1e-12 * theta_target:
            break
        omega *= math.sqrt(theta_target / theta)
    else:
        raise ScheduleError("gate-angle fixed point did not converge")

    # Carrier snap onto the feasible effective-carrier grid.
    conv = _dd_conversion(omega, delta)
    spacing = (n_pf + 1) * xi / n_loops
    if omega_dd_target == 0.0:
        eff = 0.0
        omega_dd = 0.0
    else:
        eff_target = omega_dd_target * conv
        k = max(1, round(eff_target / spacing))
        eff = k * spacing
        omega_dd = eff / conv
        if abs(omega_dd - omega_dd_target) > 0.5 * abs(omega_dd_target):
            raise ScheduleError(
                "no feasible carrier amplitude within 50% of the target; "
                f"nearest is {omega_dd / const.TWO_PI:.1f} Hz for "
                f"{n_pf} flips over {t_gate * 1e3:.3f} ms"
            )

    flips = tuple(t_gate * k / (n_pf + 1) for k in range(1, n_pf + 1))
    x = 2.0 * omega / delta
    phi_m = 4.0 * omega_dd * bessel_j(1, x) / (delta * bessel_j(0, x))
    if not phase_modulated:
        phi_m = 0.0

    # The mid-gate pi pulse is synchronized with the bus mode: it fires at
    # the whole trap period nearest to t_gate/2, so the spin-dependent
    # displacement is closed when the spin frame flips.  (At t_gate the
    # loop closure makes this automatic.)
    half_periods = round(p.nu * t_gate / (4.0 * math.pi))
    t_mid = half_periods * 2.0 * math.pi / p.nu

    return ControlSchedule(
        omega=omega,
        delta=delta,
        xi=xi,
        big_n=big_n,
        n_loops=n_loops,
        t_gate=t_gate,
        omega_dd=omega_dd,
        eff_dd=eff,
        n_pf=n_pf,
        flip_times=flips,
        pi_pulse_times=(t_mid, t_gate),
        phase_amplitude=phi_m,
        eta=eta,
        nu=p.nu,
        phase_modulated=phase_modulated,
    )


def with_carrier(s: ControlSchedule, omega_dd: float) -> ControlSchedule:
    """Copy of a schedule with a different carrier amplitude.

    The value is not snapped; use valid_dd_amplitudes to stay on the
    feasible grid.  Phase-modulation amplitude tracks the new carrier.
    """
    eff = effective_dd(omega_dd, s.omega, s.delta)
    phi_m = 4.0 * omega_dd * s.j1 / (s.delta * s.j0) if s.phase_modulated else 0.0
    return replace(s, omega_dd=omega_dd, eff_dd=eff, phase_amplitude=phi_m)


def validate_schedule(s: ControlSchedule, tol: float = 1e-9) -> None:
    """Check every commensurability invariant of a schedule."""

    def _near_integer(x):
        return abs(x - round(x)) <= tol

    if s.big_n < 2:
        raise ScheduleError("N must be >= 2")
    if abs(s.xi * (s.big_n - 1) - s.nu) > tol * s.nu:
        raise ScheduleError("xi != nu/(N-1)")
    if abs(s.delta - s.xi * s.big_n) > tol * s.delta:
        raise ScheduleError("delta != N*xi")
    if not _near_integer(s.delta * s.t_gate / const.TWO_PI):
        raise ScheduleError("bichromatic frame does not close at t_gate")
    if not _near_integer(s.eff_dd * s.t_gate / const.TWO_PI):
        raise ScheduleError("carrier rotation does not close at t_gate")
    bounds = s.segment_bounds()
    if np.any(np.diff(bounds) <= 0):
        raise ScheduleError("flip times must increase inside (0, t_gate)")
    for dt_seg in np.diff(bounds):
        if s.eff_dd > 0 and not _near_integer(dt_seg * s.eff_dd / const.TWO_PI):
            raise ScheduleError("flip interval not a multiple of the carrier period")
        if s.phase_modulated and not _near_integer(dt_seg * s.delta / math.pi):
            raise ScheduleError("flip interval not a multiple of pi/delta")
