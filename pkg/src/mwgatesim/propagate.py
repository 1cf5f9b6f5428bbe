"""Time evolution of states and density matrices under the driven models.

The default integrator is fixed-step RK4 with the step tied to the
fastest angular frequency of the model (1/50 of its period unless
overridden).  Integration is split at the carrier sign flips so no step
straddles a control discontinuity, and the refocusing pi pulses are
applied as instantaneous rotations at mid-gate and gate end.  Heating is
handled either by quantum-jump wavefunction trajectories (default; the
state stays a vector) or by direct integration of the master equation
(used as a cross-check at reduced truncation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.integrate import solve_ivp

from .controls import ControlSchedule, PhysicalParams, flip_sign
from .models import (
    NO_ERRORS,
    HamiltonianTerms,
    StaticErrors,
    build_hamiltonian,
)
from .noise import (
    DriveNoise,
    LindbladChannel,
    MagneticNoise,
    sample_noise_realization,
)
from .qops import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    HilbertLayout,
    partial_trace,
    reduced_qubit_density,
    thermal_probabilities,
)

NORM_DRIFT_LIMIT = 1e-7
TRACE_DRIFT_LIMIT = 1e-7

_MODE_SLOT = 2  # center-of-mass mode position in every layout


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"            # "rk4" fixed step or "adaptive"
    step_fraction: float = 1.0 / 50.0  # fixed step as fraction of fastest period
    dt: float | None = None        # explicit step override (s)
    rtol: float = 1e-8
    atol: float = 1e-10

    def step_for(self, ham: HamiltonianTerms) -> float:
        if self.dt is not None:
            return self.dt
        return (2.0 * math.pi / ham.fastest) * self.step_fraction


DEFAULT_INTEGRATOR = IntegratorConfig()


@dataclass
class TrajectoryResult:
    fidelity: float
    qubit_state: np.ndarray      # 4x4 reduced density matrix
    seed_key: tuple
    norm_drift: float = 0.0
    n_jumps: int = 0
    initial_modes: tuple = ()


@dataclass
class SimulationResult:
    mean_fidelity: float
    stderr: float
    fidelities: np.ndarray
    trajectories: list
    master_seed: int
    n_realizations: int


def _segments(t0: float, t1: float, flip_times) -> list[tuple[float, float, float]]:
    """(start, stop, carrier sign) pieces of [t0, t1] between sign flips."""
    cuts = [t0] + [t for t in flip_times if t0 < t < t1] + [t1]
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 0:
            continue
        f = float(flip_sign(0.5 * (a + b), flip_times))
        out.append((a, b, f))
    return out


def _rk4_run(ham: HamiltonianTerms, psi: np.ndarray, t0: float, t1: float,
             dt_target: float, f: float, jump_state=None,
             chunk_steps: int = 16384) -> np.ndarray:
    """Fixed-step RK4 over [t0, t1] at constant carrier sign.

    Coefficients are evaluated vectorized on the half-step grid in chunks.
    When `jump_state` is given (quantum-jump evolution) the squared norm
    is tracked against the current jump threshold after every step.
    """
    cols, vals = ham.cols, ham.vals
    span = t1 - t0
    if span <= 0:
        return psi
    n_steps = max(1, math.ceil(span / dt_target - 1e-12))
    h = span / n_steps
    done = 0
    t_chunk = t0
    while done < n_steps:
        m = min(chunk_steps, n_steps - done)
        times = t_chunk + 0.5 * h * np.arange(2 * m + 1)
        gam = ham.coeffs(times, f=np.full(2 * m + 1, f))
        for i in range(m):
            g0 = gam[2 * i]
            g1 = gam[2 * i + 1]
            g2 = gam[2 * i + 2]
            k1 = -1j * (g0 @ (vals * psi[cols]))
            y = psi + (0.5 * h) * k1
            k2 = -1j * (g1 @ (vals * y[cols]))
            y = psi + (0.5 * h) * k2
            k3 = -1j * (g1 @ (vals * y[cols]))
            y = psi + h * k3
            k4 = -1j * (g2 @ (vals * y[cols]))
            psi = psi + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
            if jump_state is not None:
                norm2 = np.vdot(psi, psi).real
                if norm2 <= jump_state["threshold"]:
                    psi = _do_jump(psi, jump_state)
        done += m
        t_chunk = t0 + done * h
    return psi


def _do_jump(psi: np.ndarray, jump_state) -> np.ndarray:
    """Apply one stochastic jump and redraw the decay threshold."""
    rng = jump_state["rng"]
    candidates = [op @ psi for op in jump_state["ops"]]
    weights = np.array([np.vdot(c, c).real for c in candidates])
    total = weights.sum()
    if total <= 0:
        raise IntegrationError("jump triggered with zero jump-rate")
    k = int(np.searchsorted(np.cumsum(weights), rng.random() * total))
    psi = candidates[k] / math.sqrt(weights[k])
    jump_state["threshold"] = rng.random()
    jump_state["count"] += 1
    return psi


def _adaptive_run(ham: HamiltonianTerms, psi, t0, t1, f, cfg) -> np.ndarray:
    def rhs(t, y):
        gam = ham.coeffs(np.array([t]), f=np.array([f]))[0]
        return -1j * ham.apply(gam, y)

    sol = solve_ivp(rhs, (t0, t1), psi, method="DOP853",
                    rtol=cfg.rtol, atol=cfg.atol,
                    max_step=(2.0 * math.pi / ham.fastest) / 10.0)
    if not sol.success:
        raise IntegrationError(f"adaptive integration failed: {sol.message}")
    return sol.y[:, -1]


def evolve_state(psi0: np.ndarray, ham: HamiltonianTerms, t0: float, t1: float,
                 cfg: IntegratorConfig = DEFAULT_INTEGRATOR,
                 diagnostics: dict | None = None) -> np.ndarray:
    """Solve i dpsi/dt = H(t) psi over [t0, t1].

    The final norm drift must stay below 1e-7 (then the state is
    renormalized); a larger drift means the step was too large.
    """
    psi = np.asarray(psi0, dtype=complex).copy()
    if psi.shape != (ham.dim,):
        raise IntegrationError("state does not match Hamiltonian dimension")
    dt = cfg.step_for(ham)
    for a, b, f in _segments(t0, t1, ham.flip_times):
        if cfg.method == "adaptive":
            psi = _adaptive_run(ham, psi, a, b, f, cfg)
        else:
            psi = _rk4_run(ham, psi, a, b, dt, f)
    if not np.all(np.isfinite(psi)):
        raise IntegrationError("non-finite amplitudes; step too large")
    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > NORM_DRIFT_LIMIT:
        raise IntegrationError(f"norm drift {drift:.2e} exceeds {NORM_DRIFT_LIMIT}")
    if diagnostics is not None:
        diagnostics["norm_drift"] = max(diagnostics.get("norm_drift", 0.0), drift)
    return psi / np.linalg.norm(psi)


def evolve_jump(psi0: np.ndarray, ham: HamiltonianTerms, channels, t0: float,
                t1: float, rng, cfg: IntegratorConfig = DEFAULT_INTEGRATOR,
                jump_state=None):
    """One quantum-jump trajectory of the dissipative evolution.

    Returns (normalized state, jump_state); pass the returned jump_state
    into subsequent calls so the running decay threshold survives pulse
    boundaries.
    """
    psi = np.asarray(psi0, dtype=complex).copy()
    ham_nh, ops = _nonhermitian_parts(ham, channels)
    if jump_state is None:
        jump_state = {"rng": rng, "threshold": rng.random(), "count": 0, "ops": ops}
    else:
        jump_state["ops"] = ops
    dt = cfg.step_for(ham)
    for a, b, f in _segments(t0, t1, ham.flip_times):
        psi = _rk4_run(ham_nh, psi, a, b, dt, f, jump_state=jump_state)
    if not np.all(np.isfinite(psi)):
        raise IntegrationError("non-finite amplitudes in jump trajectory")
    return psi, jump_state


def _nonhermitian_parts(ham: HamiltonianTerms, channels):
    """Damped Hamiltonian H - (i/2) sum L^dag L and dense jump operators."""
    dim = ham.dim
    damping = np.zeros(dim)
    ops = []
    for ch in channels:
        for L in ch.jump_operators(ham.layout.dims[_MODE_SLOT]):
            L_full = ham.layout.embed(L, _MODE_SLOT)
            ops.append(L_full)
            damping = damping + np.einsum("ij,ij->j", L_full.conj(), L_full).real
    ham_nh = ham.with_constant_diagonal(-0.5j * damping)
    return ham_nh, ops


def evolve_lindblad(rho0: np.ndarray, ham: HamiltonianTerms, channels,
                    t0: float, t1: float,
                    cfg: IntegratorConfig = DEFAULT_INTEGRATOR) -> np.ndarray:
    """Master-equation evolution with the thermal channels.

    Direct dense integration; intended for cross-checks at reduced
    truncation (the state grows as dim^2).
    """
    dim = ham.dim
    rho = np.asarray(rho0, dtype=complex).copy()
    if rho.shape != (dim, dim):
        raise IntegrationError("density matrix does not match Hamiltonian")
    ls = []
    for ch in channels:
        for L in ch.jump_operators(ham.layout.dims[_MODE_SLOT]):
            ls.append(ham.layout.embed(L, _MODE_SLOT))
    lducts = [(L, L.conj().T @ L) for L in ls]

    def rhs(t, y, f):
        r = y.reshape(dim, dim)
        h = ham.matrix(t, f=f)
        dr = -1j * (h @ r - r @ h)
        for L, LdL in lducts:
            dr += L @ r @ L.conj().T - 0.5 * (LdL @ r + r @ LdL)
        return dr.ravel()

    for a, b, f in _segments(t0, t1, ham.flip_times):
        sol = solve_ivp(rhs, (a, b), rho.ravel(), method="DOP853",
                        rtol=cfg.rtol, atol=cfg.atol, args=(f,),
                        max_step=(2.0 * math.pi / ham.fastest) / 10.0)
        if not sol.success:
            raise IntegrationError(f"master equation failed: {sol.message}")
        rho = sol.y[:, -1].reshape(dim, dim)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_DRIFT_LIMIT * 100:
        raise IntegrationError(f"trace drift {abs(tr - 1.0):.2e}")
    rho = 0.5 * (rho + rho.conj().T)
    w = np.linalg.eigvalsh(rho)
    if w.min() < -1e-8:
        raise IntegrationError(f"positivity violated: min eigenvalue {w.min():.2e}")
    return rho / tr


_PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


def pulse_unitary(layout: HilbertLayout, qubit: int, axis: str, angle: float) -> np.ndarray:
    """exp(i (angle/2) sigma_qubit^axis) on the composite space."""
    sigma = _PAULI[axis]
    u2 = math.cos(0.5 * angle) * np.eye(2) + 1j * math.sin(0.5 * angle) * sigma
    return layout.embed(u2, qubit)


def apply_instantaneous_pulse(state: np.ndarray, layout: HilbertLayout,
                              qubit: int, axis: str = "y",
                              angle: float = math.pi) -> np.ndarray:
    """Rotate one qubit instantaneously; accepts a ket or a density matrix."""
    if qubit not in (0, 1):
        raise ValueError("qubit index must be 0 or 1")
    u = pulse_unitary(layout, qubit, axis, angle)
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return u @ state
    return u @ state @ u.conj().T


def _initial_fock_numbers(p: PhysicalParams, model_kind: str, initial_modes, rng):
    n_modes = 2 if model_kind == "full" else 1
    if initial_modes == "vacuum":
        return (0,) * n_modes
    if initial_modes == "thermal":
        ns = [int(rng.choice(p.n_cm, p=thermal_probabilities(p.n_cm, p.nbar0)))]
        if n_modes == 2:
            ns.append(int(rng.choice(p.n_br, p=thermal_probabilities(p.n_br, p.nbar0))))
        return tuple(ns)
    ns = tuple(int(n) for n in initial_modes)
    if len(ns) != n_modes:
        raise ValueError(f"expected {n_modes} mode occupation(s), got {ns}")
    return ns


def run_trajectory(
    p: PhysicalParams,
    s: ControlSchedule,
    *,
    model_kind: str = "full",
    static: StaticErrors = NO_ERRORS,
    magnetic: MagneticNoise | None = None,
    drive: DriveNoise | None = None,
    heating: LindbladChannel | None = None,
    dissipation_method: str = "jump",
    initial_modes="thermal",
    integrator: IntegratorConfig = DEFAULT_INTEGRATOR,
    target: np.ndarray | None = None,
    model_options: dict | None = None,
    apply_pi_pulses: bool = True,
    master_seed: int = 0,
    index: int = 0,
) -> TrajectoryResult:
    """Simulate one realization of the complete gate protocol.

    Samples initial Fock occupations and noise paths, integrates the
    chosen model over the gate with the carrier sign flips, applies the
    pi pulse on qubit 1 at mid-gate and at the end, and scores the
    reduced qubit state against the Bell target.
    """
    seed_key = (int(master_seed), int(index))
    rng = np.random.default_rng(np.random.SeedSequence(seed_key))
    ns = _initial_fock_numbers(p, model_kind, initial_modes, rng)
    noise = sample_noise_realization(magnetic, drive, s.t_gate, rng)
    ham = build_hamiltonian(model_kind, p, s, static=static, noise=noise,
                            **(model_options or {}))
    layout = ham.layout
    psi = layout.basis_state((1, 1) + ns)  # |g, g, n_cm(, n_br)>

    if target is None:
        from .analysis import calibrate_target
        target = calibrate_target(p, s, integrator)

    channels = [heating] if (heating is not None and heating.gamma > 0) else []
    if apply_pi_pulses:
        windows = [(0.0, s.pi_pulse_times[0]),
                   (s.pi_pulse_times[0], s.pi_pulse_times[1])]
    else:
        windows = [(0.0, s.t_gate)]

    def pulse(state):
        if apply_pi_pulses:
            return apply_instantaneous_pulse(state, layout, 0, "y", math.pi)
        return state

    n_jumps = 0
    norm_drift = 0.0
    if channels and dissipation_method == "lindblad":
        rho = np.outer(psi, psi.conj())
        for a, b in windows:
            rho = evolve_lindblad(rho, ham, channels, a, b, integrator)
            rho = pulse(rho)
        rho_q = partial_trace(rho, layout, keep=(0, 1))
    elif channels:
        jump_state = None
        for a, b in windows:
            psi, jump_state = evolve_jump(psi, ham, channels, a, b, rng,
                                          integrator, jump_state)
            psi = pulse(psi)
        n_jumps = jump_state["count"]
        psi = psi / np.linalg.norm(psi)
        rho_q = reduced_qubit_density(psi, layout)
    else:
        diag = {}
        for a, b in windows:
            psi = evolve_state(psi, ham, a, b, integrator, diagnostics=diag)
            psi = pulse(psi)
        norm_drift = diag.get("norm_drift", 0.0)
        rho_q = reduced_qubit_density(psi, layout)

    fidelity = float(np.real(np.conj(target) @ rho_q @ target))
    return TrajectoryResult(fidelity=fidelity, qubit_state=rho_q,
                            seed_key=seed_key, norm_drift=norm_drift,
                            n_jumps=n_jumps, initial_modes=ns)


def _ensemble_worker(kwargs):
    return run_trajectory(**kwargs)


def run_ensemble(
    p: PhysicalParams,
    s: ControlSchedule,
    *,
    n_realizations: int,
    master_seed: int = 0,
    n_jobs: int = 1,
    **traj_kwargs,
) -> SimulationResult:
    """Independent trajectories with seeds derived from (master_seed, index).

    Results are reduced in trajectory order, so the ensemble statistics do
    not depend on scheduling; rerunning with the same master seed
    reproduces them bit for bit.
    """
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    if traj_kwargs.get("target") is None:
        from .analysis import calibrate_target
        traj_kwargs["target"] = calibrate_target(
            p, s, traj_kwargs.get("integrator", DEFAULT_INTEGRATOR))
    jobs = [dict(p=p, s=s, master_seed=master_seed, index=i, **traj_kwargs)
            for i in range(n_realizations)]
    if n_jobs > 1 and n_realizations > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(_ensemble_worker, jobs))
    else:
        results = [run_trajectory(**kw) for kw in jobs]
    fids = np.array([r.fidelity for r in results])
    mean = float(fids.mean())
    stderr = float(fids.std(ddof=1) / math.sqrt(len(fids))) if len(fids) > 1 else 0.0
    return SimulationResult(mean_fidelity=mean, stderr=stderr, fidelities=fids,
                            trajectories=results, master_seed=master_seed,
                            n_realizations=n_realizations)
