"""Simulator for microwave-driven entangling gates between two trapped ions.

The package models two hyperfine qubits in a static magnetic-field
gradient sharing two axial vibrational modes, driven by a hybrid control
program: a bichromatic field closing spin-dependent phase-space loops, a
resonant carrier protecting against dephasing, phase modulation of all
drives, periodic carrier sign flips and two refocusing pi pulses.  It
propagates the full time-dependent Hamiltonian with crosstalk, stochastic
control noise and motional heating, and scores Bell-state fidelities.
"""

from .analysis import (
    FidelityReport,
    bell_fidelity,
    calibrate_target,
    concurrence,
    ideal_bell_state,
    infidelity_stats,
    magnus2_numeric,
)
from .bessel import bessel_j
from .controls import (
    ControlSchedule,
    PhysicalParams,
    ScheduleError,
    effective_dd,
    gate_angle,
    lamb_dicke,
    phase_modulation,
    qubit_splitting,
    solve_schedule,
    valid_dd_amplitudes,
    validate_schedule,
    with_carrier,
)
from .models import (
    DressedFrameCoupling,
    HamiltonianTerms,
    StaticErrors,
    build_hamiltonian,
    full_hamiltonian,
    gate_hamiltonian,
    gate_unitary,
    ideal_gate_unitary,
    second_order_coefficients,
    second_order_effective,
    simplified_hamiltonian,
    without_modulation,
)
from .noise import (
    DriveNoise,
    LindbladChannel,
    MagneticNoise,
    OUParams,
    calibrate_ou_from_T2,
    dephasing_exponent,
    heating_channel,
    ou_sample_path,
)
from .propagate import (
    IntegratorConfig,
    SimulationResult,
    TrajectoryResult,
    apply_instantaneous_pulse,
    evolve_jump,
    evolve_lindblad,
    evolve_state,
    run_ensemble,
    run_trajectory,
)
from .qops import (
    HilbertLayout,
    collective_spin,
    ladder,
    matrix_exponential,
    partial_trace,
    tensor,
    thermal_state,
)

__version__ = "0.1.0"
