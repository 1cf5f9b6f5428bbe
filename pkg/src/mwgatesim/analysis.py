"""Fidelity scoring, ensemble statistics and independent numerical oracles.

The Bell target against which runs are scored is produced by a
calibration run of the carrier-free protocol (the plain loop-closing
gate), not hardcoded, so the sign conventions of the package and of the
analytic formulas can never drift apart.  A nested-quadrature Magnus
oracle cross-checks the closed-form second-order coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .controls import ControlSchedule, PhysicalParams
from .models import gate_hamiltonian
from .propagate import (
    DEFAULT_INTEGRATOR,
    IntegratorConfig,
    evolve_state,
)
from .qops import SIGMA_Y, reduced_qubit_density, tensor

PURITY_THRESHOLD = 1.0 - 1e-5


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class FidelityReport:
    mean_fidelity: float
    stderr: float
    n_realizations: int
    log10_infidelity: float
    fidelities: tuple[float, ...]


def ideal_bell_state() -> np.ndarray:
    """(|gg> + i|ee>)/sqrt(2) in the (ee, eg, ge, gg) basis."""
    v = np.zeros(4, dtype=complex)
    v[3] = 1.0 / math.sqrt(2.0)
    v[0] = 1j / math.sqrt(2.0)
    return v


def bell_fidelity(rho_qubits: np.ndarray, target: np.ndarray) -> float:
    """Overlap <target| rho |target> of a two-qubit state with a pure target."""
    rho = np.asarray(rho_qubits, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError("expected a 4x4 two-qubit density matrix")
    t = np.asarray(target, dtype=complex)
    return float(np.real(np.conj(t) @ rho @ t))


def concurrence(rho_qubits: np.ndarray) -> float:
    """Wootters concurrence of a two-qubit density matrix."""
    rho = np.asarray(rho_qubits, dtype=complex)
    yy = tensor(SIGMA_Y, SIGMA_Y)
    rho_tilde = yy @ rho.conj() @ yy
    w = np.linalg.eigvals(rho @ rho_tilde)
    lam = np.sort(np.sqrt(np.clip(w.real, 0.0, None)))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


@lru_cache(maxsize=32)
def _calibrate(p: PhysicalParams, s_cal: ControlSchedule,
               cfg: IntegratorConfig) -> tuple:
    ham = gate_hamiltonian(p, s_cal)
    psi = ham.layout.basis_state((1, 1, 0))
    psi = evolve_state(psi, ham, 0.0, s_cal.t_gate, cfg)
    rho_q = reduced_qubit_density(psi, ham.layout)
    purity = float(np.real(np.trace(rho_q @ rho_q)))
    if purity < PURITY_THRESHOLD:
        raise CalibrationError(
            f"calibration state purity {purity:.6f} below threshold; "
            "the schedule does not close a clean loop"
        )
    w, v = np.linalg.eigh(rho_q)
    target = v[:, -1]
    # Canonical global phase: real positive |gg> amplitude.
    phase = target[3] / abs(target[3])
    target = target / phase
    return tuple(target)


def calibrate_target(p: PhysicalParams, s: ControlSchedule,
                     cfg: IntegratorConfig = DEFAULT_INTEGRATOR) -> np.ndarray:
    """Canonical Bell target of a schedule, from a calibration run.

    Integrates the bare entangling generator of the schedule (carrier,
    phase modulation and sign flips off) from |g,g,0> over the gate time
    and extracts the pure part of the reduced qubit state.  The result is
    the maximally entangled |gg>/|ee> superposition the protocol aims at;
    deriving it from the dynamics rather than from a formula pins down
    the sign conventions, and it is independent of the loop count of the
    schedule because closed loops always end on the same state.
    """
    s_cal = replace(s, omega_dd=0.0, eff_dd=0.0, phase_amplitude=0.0,
                    n_pf=0, flip_times=())
    return np.array(_calibrate(p, s_cal, cfg))


def magnus2_numeric(hamiltonian, total_time: float,
                    fast_frequencies=None,
                    points_per_period: int = 400,
                    _check_convergence: bool = True) -> np.ndarray:
    """Time-averaged second-order effective Hamiltonian by quadrature.

    Computes -(i/(2T)) int_0^T dt int_0^t dt' [H(t), H(t')] with nested
    composite Simpson rules.  T must hold an integer number of periods of
    every fast frequency (tolerance 1e-6) so only the secular part
    survives.  Raises if doubling the resolution moves the result by more
    than 1e-8 relative to its norm.
    """
    h_fn = hamiltonian.matrix if hasattr(hamiltonian, "matrix") else hamiltonian
    if fast_frequencies is None:
        fast_frequencies = getattr(hamiltonian, "frequencies")
    for w in fast_frequencies:
        cycles = w * total_time / (2.0 * math.pi)
        if abs(cycles - round(cycles)) > 1e-6:
            raise ValueError(
                f"averaging time is not commensurate with frequency {w}"
            )

    def compute(n_per_period: int) -> np.ndarray:
        t_fast = 2.0 * math.pi / max(fast_frequencies)
        m = math.ceil(total_time / (t_fast / n_per_period))
        m += (-m) % 4  # Simpson needs even counts at both nesting levels
        h = total_time / m
        h_even = h_fn(0.0)
        dim = h_even.shape[0]
        g_cum = np.zeros((dim, dim), dtype=complex)  # int_0^{t_{2j}} H dt'
        outer = np.zeros((dim, dim), dtype=complex)
        n_outer = m // 2
        for j in range(n_outer + 1):
            comm = h_even @ g_cum - g_cum @ h_even
            weight = 1.0 if j in (0, n_outer) else (4.0 if j % 2 == 1 else 2.0)
            outer += weight * comm
            if j < n_outer:
                h_mid = h_fn((2 * j + 1) * h)
                h_next = h_fn((2 * j + 2) * h)
                g_cum = g_cum + (h / 3.0) * (h_even + 4.0 * h_mid + h_next)
                h_even = h_next
        outer *= (2.0 * h) / 3.0
        return -0.5j * outer / total_time

    result = compute(points_per_period)
    if _check_convergence:
        finer = compute(2 * points_per_period)
        scale = max(np.max(np.abs(result)), 1e-300)
        if np.max(np.abs(finer - result)) > 1e-8 * scale:
            raise RuntimeError("Magnus quadrature did not converge")
        result = finer
    return result


def infidelity_stats(results) -> FidelityReport:
    """Ensemble mean, standard error and log-infidelity
    of trajectory results or bare fidelities."""
    fids = [r.fidelity if hasattr(r, "fidelity") else float(r) for r in results]
    if not fids:
        raise ValueError("no trajectories to summarize")
    arr = np.array(fids, dtype=float)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    log_inf = math.log10(1.0 - mean) if mean < 1.0 else float("nan")
    return FidelityReport(mean_fidelity=mean, stderr=stderr,
                          n_realizations=len(arr), log10_infidelity=log_inf,
                          fidelities=tuple(float(f) for f in arr))
