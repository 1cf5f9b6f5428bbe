"""Operator and state algebra on the composite Hilbert space.

The composite space is an ordered tensor product of subsystems, fixed as
(qubit 1, qubit 2, center-of-mass mode, breathing mode) for the full model
and (qubit 1, qubit 2, center-of-mass mode) for the reduced ones.  Qubit
basis order is (|e>, |g>), so sigma_z = diag(+1, -1), sigma_plus = |e><g|
and sigma_y = -i|e><g| + i|g><e|.  Everything is dense complex numpy; the
largest default space is 2*2*15*5 = 300 dimensional, where dense BLAS wins
over any sparse bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.linalg import expm as _expm

HERMITICITY_TOL = 1e-12
STATE_NORM_TOL = 1e-9
POSITIVITY_FLOOR = -1e-10

# Qubit basis: index 0 = |e>, index 1 = |g>.
KET_E = np.array([1.0, 0.0], dtype=complex)
KET_G = np.array([0.0, 1.0], dtype=complex)

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.conj().T.copy()


class QopsError(ValueError):
    """Raised for invalid operator/state constructions."""


@dataclass(frozen=True)
class HilbertLayout:
    """Ordered subsystem dimensions of a composite Hilbert space."""

    dims: tuple[int, ...]

    def __post_init__(self):
        if not self.dims:
            raise QopsError("layout needs at least one subsystem")
        if any(int(d) < 1 for d in self.dims):
            raise QopsError(f"subsystem dimensions must be >= 1, got {self.dims}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def dim(self) -> int:
        out = 1
        for d in self.dims:
            out *= d
        return out

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def embed(self, op: np.ndarray, slot: int) -> np.ndarray:
        """Tensor `op` acting on subsystem `slot` with identities elsewhere."""
        if not 0 <= slot < len(self.dims):
            raise QopsError(f"slot {slot} out of range for {self.dims}")
        op = np.asarray(op, dtype=complex)
        if op.shape != (self.dims[slot], self.dims[slot]):
            raise QopsError(
                f"operator shape {op.shape} does not match subsystem dim "
                f"{self.dims[slot]}"
            )
        factors = [
            op if k == slot else np.eye(d, dtype=complex)
            for k, d in enumerate(self.dims)
        ]
        return tensor(*factors)

    def basis_state(self, indices) -> np.ndarray:
        """Product basis ket |i0, i1, ...> as a flat vector."""
        indices = tuple(int(i) for i in indices)
        if len(indices) != len(self.dims):
            raise QopsError("one basis index per subsystem required")
        for i, d in zip(indices, self.dims):
            if not 0 <= i < d:
                raise QopsError(f"basis index {i} out of range for dim {d}")
        psi = np.zeros(self.dim, dtype=complex)
        psi[np.ravel_multi_index(indices, self.dims)] = 1.0
        return psi


def tensor(*factors) -> np.ndarray:
    """Kronecker product of square operators, in the given order."""
    if len(factors) == 1 and isinstance(factors[0], (list, tuple)):
        factors = tuple(factors[0])
    if not factors:
        raise QopsError("tensor() needs at least one factor")
    mats = []
    for f in factors:
        m = np.asarray(f, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QopsError("tensor factors must be square matrices")
        mats.append(m)
    return reduce(np.kron, mats)


def ladder(dim: int) -> np.ndarray:
    """Annihilation operator a with a|n> = sqrt(n)|n-1>, truncated at `dim`."""
    if dim < 2:
        raise QopsError("ladder operator needs dim >= 2")
    a = np.zeros((dim, dim), dtype=complex)
    ns = np.arange(1, dim)
    a[ns - 1, ns] = np.sqrt(ns)
    return a


def number_operator(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim).astype(complex))


_SINGLE_SPIN = {
    "x": SIGMA_X,
    "y": SIGMA_Y,
    "z": SIGMA_Z,
    "+": SIGMA_PLUS,
    "-": SIGMA_MINUS,
}


def collective_spin(axis: str, layout: HilbertLayout, qubit_slots=(0, 1)) -> np.ndarray:
    """Two-qubit collective spin operator embedded on the full layout.

    Axes "x", "y", "z", "+", "-" give sums sigma_1 + sigma_2.  The dressed
    combinations "dressed+" / "dressed-" are (S_z +- i S_x)/2, the raising
    and lowering operators in the basis dressed by a resonant carrier.
    """
    if axis in _SINGLE_SPIN:
        op = _SINGLE_SPIN[axis]
        return sum(layout.embed(op, s) for s in qubit_slots)
    if axis in ("dressed+", "dressed-"):
        sign = 1.0 if axis == "dressed+" else -1.0
        sz = collective_spin("z", layout, qubit_slots)
        sx = collective_spin("x", layout, qubit_slots)
        return 0.5 * (sz + sign * 1j * sx)
    raise QopsError(f"unknown collective spin axis {axis!r}")


def partial_trace(rho: np.ndarray, layout: HilbertLayout, keep) -> np.ndarray:
    """Reduced density matrix over the kept subsystem indices."""
    keep = sorted(int(k) for k in keep)
    if not keep:
        raise QopsError("keep must name at least one subsystem")
    if any(k < 0 or k >= layout.n_subsystems for k in keep):
        raise QopsError(f"keep indices {keep} out of range for {layout.dims}")
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (layout.dim, layout.dim):
        raise QopsError("density matrix does not match layout dimension")
    n = layout.n_subsystems
    resh = rho.reshape(layout.dims + layout.dims)
    # Contract each traced subsystem pairwise, from the highest axis down so
    # earlier axis numbers stay valid.
    traced = [k for k in range(n) if k not in keep]
    current_n = n
    for k in sorted(traced, reverse=True):
        resh = np.trace(resh, axis1=k, axis2=k + current_n)
        current_n -= 1
    d_keep = int(np.prod([layout.dims[k] for k in keep]))
    return resh.reshape(d_keep, d_keep)


def reduced_qubit_density(psi: np.ndarray, layout: HilbertLayout) -> np.ndarray:
    """4x4 qubit density matrix of a pure state, modes traced out."""
    m = np.asarray(psi, dtype=complex).reshape(4, -1)
    return m @ m.conj().T


def thermal_probabilities(dim: int, nbar: float) -> np.ndarray:
    """Truncated, renormalized thermal occupation probabilities."""
    if dim < 1:
        raise QopsError("thermal state needs dim >= 1")
    if nbar < 0:
        raise QopsError("mean occupation must be >= 0")
    if nbar == 0:
        p = np.zeros(dim)
        p[0] = 1.0
        return p
    ratio = nbar / (nbar + 1.0)
    p = ratio ** np.arange(dim)
    return p / p.sum()


def thermal_state(dim: int, nbar: float) -> np.ndarray:
    return np.diag(thermal_probabilities(dim, nbar)).astype(complex)


def matrix_exponential(a: np.ndarray, scale: complex = 1.0, hermitian: bool = False) -> np.ndarray:
    """exp(scale * a), by eigendecomposition for Hermitian a, else Pade."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise QopsError("matrix exponential needs a square matrix")
    if not np.all(np.isfinite(a)):
        raise QopsError("matrix exponential with non-finite entries")
    if hermitian:
        assert_hermitian(a)
        w, v = np.linalg.eigh(a)
        return (v * np.exp(scale * w)) @ v.conj().T
    return _expm(scale * a)


def assert_hermitian(a: np.ndarray, tol: float = HERMITICITY_TOL) -> None:
    dev = np.max(np.abs(a - a.conj().T))
    if dev >= tol:
        raise QopsError(f"matrix not Hermitian: max |A - A^dag| = {dev:.3e}")


def check_state_vector(psi: np.ndarray, tol: float = STATE_NORM_TOL) -> None:
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise QopsError(f"state norm {norm} deviates from 1 beyond {tol}")


def check_density_matrix(rho: np.ndarray, tol: float = STATE_NORM_TOL,
                         eig_floor: float = POSITIVITY_FLOOR) -> None:
    assert_hermitian(rho, tol=1e-9)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise QopsError(f"density matrix trace {tr} deviates from 1 beyond {tol}")
    w = np.linalg.eigvalsh(rho)
    if w.min() < eig_floor:
        raise QopsError(f"density matrix has eigenvalue {w.min():.3e} below floor")
