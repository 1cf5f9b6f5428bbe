"""Stochastic control noise and motional heating.

Magnetic-field and drive-amplitude fluctuations are stationary
Ornstein-Uhlenbeck processes, sampled with the exact discrete update
x_{k+1} = mu x_k + sigma sqrt(1 - mu^2) n_k, mu = e^{-dt/tau}, which is
distribution-exact for any step.  Magnetic noise strength is calibrated
from a quoted coherence time T2: free-induction coherence under
H = eps(t)/2 sigma_z decays as exp(-chi(t)) with
chi(t) = sigma^2 tau^2 (t/tau - 1 + e^{-t/tau}), and sigma solves
chi(T2) = 1.  Heating of the bus mode is a thermal Lindblad channel with
jump operators sqrt(Gamma(Nbar+1)) a and sqrt(Gamma Nbar) a^dag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import constants as const
from .qops import ladder

SAMPLES_PER_TAU = 50


@dataclass(frozen=True)
class OUParams:
    """Zero-mean Ornstein-Uhlenbeck process parameters."""

    tau: float    # correlation time (s)
    sigma: float  # stationary standard deviation

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("correlation time must be positive")
        if self.sigma < 0:
            raise ValueError("stationary deviation must be >= 0")


def dephasing_exponent(t, tau: float, sigma: float):
    """chi(t) = sigma^2 tau^2 (t/tau - 1 + exp(-t/tau))."""
    t = np.asarray(t, dtype=float)
    return sigma**2 * tau**2 * (t / tau - 1.0 + np.exp(-t / tau))


def calibrate_ou_from_T2(tau: float, t2: float) -> OUParams:
    """Noise strength such that free-induction coherence hits 1/e at t2."""
    if tau <= 0 or t2 <= 0:
        raise ValueError("tau and T2 must be positive")
    sigma = 1.0 / (tau * math.sqrt(t2 / tau - 1.0 + math.exp(-t2 / tau)))
    return OUParams(tau=tau, sigma=sigma)


def ou_sample_path(params: OUParams, dt: float, steps: int, rng) -> np.ndarray:
    """Stationary path of steps+1 samples on a grid of spacing dt."""
    if dt <= 0 or steps < 1:
        raise ValueError("need dt > 0 and steps >= 1")
    if params.sigma == 0.0:
        return np.zeros(steps + 1)
    mu = math.exp(-dt / params.tau)
    kick = params.sigma * math.sqrt(1.0 - mu * mu)
    normals = rng.standard_normal(steps + 1)
    x = np.empty(steps + 1)
    x[0] = params.sigma * normals[0]
    for k in range(steps):
        x[k + 1] = mu * x[k] + kick * normals[k + 1]
    return x


@dataclass(frozen=True)
class SampledPath:
    """Uniformly sampled noise path, linearly interpolated between samples."""

    dt: float
    values: np.ndarray

    def at(self, times) -> np.ndarray:
        grid = self.dt * np.arange(len(self.values))
        return np.interp(np.asarray(times, dtype=float), grid, self.values)


def sample_ou_path(params: OUParams, duration: float, rng,
                   samples_per_tau: int = SAMPLES_PER_TAU) -> SampledPath:
    """OU path covering [0, duration] on a grid of tau/samples_per_tau."""
    dt = params.tau / samples_per_tau
    steps = max(1, math.ceil(duration / dt))
    return SampledPath(dt=dt, values=ou_sample_path(params, dt, steps, rng))


@dataclass(frozen=True)
class MagneticNoise:
    """Qubit-frequency OU noise, quoted as (correlation time, T2)."""

    tau: float
    t2: float
    correlated: bool = False  # common-mode on both qubits when True

    @property
    def params(self) -> OUParams:
        return calibrate_ou_from_T2(self.tau, self.t2)


@dataclass(frozen=True)
class DriveNoise:
    """Relative drive-amplitude OU noise, common to both drive tones."""

    tau: float
    relative_std: float

    @property
    def params(self) -> OUParams:
        return OUParams(tau=self.tau, sigma=self.relative_std)


@dataclass(frozen=True)
class NoiseRealization:
    """Per-trajectory sampled noise paths."""

    eps1: SampledPath | None = None
    eps2: SampledPath | None = None
    drive_rel: SampledPath | None = None


def sample_noise_realization(magnetic: MagneticNoise | None,
                             drive: DriveNoise | None,
                             duration: float, rng) -> NoiseRealization | None:
    if magnetic is None and drive is None:
        return None
    eps1 = eps2 = drive_rel = None
    if magnetic is not None:
        eps1 = sample_ou_path(magnetic.params, duration, rng)
        eps2 = eps1 if magnetic.correlated else sample_ou_path(
            magnetic.params, duration, rng)
    if drive is not None:
        drive_rel = sample_ou_path(drive.params, duration, rng)
    return NoiseRealization(eps1=eps1, eps2=eps2, drive_rel=drive_rel)


@dataclass(frozen=True)
class LindbladChannel:
    """Thermal coupling of a bosonic mode to its environment."""

    gamma: float  # coupling rate (1/s)
    nbar: float   # environment occupation

    def __post_init__(self):
        if self.gamma < 0 or self.nbar < 0:
            raise ValueError("gamma and nbar must be >= 0")

    def jump_operators(self, dim: int) -> list[np.ndarray]:
        a = ladder(dim)
        return [
            math.sqrt(self.gamma * (self.nbar + 1.0)) * a,
            math.sqrt(self.gamma * self.nbar) * a.conj().T,
        ]

    @property
    def heating_rate(self) -> float:
        """Phonons gained per second from the ground state."""
        return self.gamma * self.nbar


def bose_occupation(nu: float, temperature: float) -> float:
    """Thermal occupation 1/(exp(hbar nu / kB T) - 1)."""
    if nu <= 0 or temperature <= 0:
        raise ValueError("nu and temperature must be positive")
    return 1.0 / math.expm1(const.HBAR * nu / (const.KB * temperature))


def heating_channel(ndot: float, nu: float, temperature: float = 300.0) -> LindbladChannel:
    """Channel reproducing a measured heating rate of ndot phonons/s."""
    if ndot < 0:
        raise ValueError("heating rate must be >= 0")
    nbar = bose_occupation(nu, temperature)
    return LindbladChannel(gamma=ndot / nbar, nbar=nbar)
