"""LTI plant model, modal decomposition, and local Luenberger observers.

The plant x[k+1] = A x[k] with per-node measurements y_i = C_i x is
transformed into modal coordinates z = V x in which the dynamics are
diagonal, so each eigenvalue ("mode") evolves as an independent scalar.
Node i can reconstruct mode j on its own iff column j of its transformed
measurement matrix is non-zero; those modes are handled by a local
observer, the rest by networked consensus.

Modes and nodes are 1-indexed throughout the public API.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Tuple

import numpy as np
from scipy.signal import place_poles

from .errors import DimensionMismatch, DomainError, ModeNotDetectable, NonRealSpectrum, RepeatedEigenvalue

EPS_GAP = 1e-8    # minimum pairwise eigenvalue separation
EPS_COL = 1e-12   # column-norm threshold for mode detectability
DIAG_TOL_FACTOR = 1e-9   # off-diagonal tolerance, relative to ||A||_F


@dataclass(frozen=True)
class Plant:
    """State dynamics A and one measurement matrix per sensor node.

    ``sensors[i-1]`` is C_i with shape (r_i, n); r_i may be zero for a node
    that measures nothing.
    """

    a: np.ndarray
    sensors: Tuple[np.ndarray, ...]

    def __init__(self, a, sensors):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DimensionMismatch(f"A must be square and non-empty, got shape {a.shape}")
        n = a.shape[0]
        mats = []
        for idx, c in enumerate(sensors, start=1):
            c = np.asarray(c, dtype=float)
            if c.size == 0:
                c = c.reshape(0, n)
            if c.ndim != 2 or c.shape[1] != n:
                raise DimensionMismatch(f"C_{idx} must have {n} columns, got shape {c.shape}")
            mats.append(c)
        if not mats:
            raise DimensionMismatch("at least one sensor node is required")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "sensors", tuple(mats))

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def n_nodes(self) -> int:
        return len(self.sensors)


@dataclass(frozen=True)
class ModalPlant:
    """Plant in modal coordinates z = V x, with V A V^-1 diagonal.

    ``lambdas`` is sorted by descending magnitude (ties: descending signed
    value), giving a stable mode indexing. ``detect_sets[i-1]`` is the set
    of modes node i can reconstruct locally; ``unstable_set`` collects all
    modes with |lambda| >= 1 and ``consensus_set`` those unstable modes
    some node cannot detect (the ones that need networked estimation).
    """

    lambdas: np.ndarray
    v: np.ndarray
    v_inv: np.ndarray
    cbar: Tuple[np.ndarray, ...]
    detect_sets: Tuple[FrozenSet[int], ...]
    unstable_set: FrozenSet[int]
    consensus_set: FrozenSet[int]

    @property
    def n(self) -> int:
        return self.lambdas.shape[0]

    @property
    def n_nodes(self) -> int:
        return len(self.cbar)

    def lam(self, j: int) -> float:
        return float(self.lambdas[j - 1])

    def detectable(self, i: int) -> FrozenSet[int]:
        """Modes node i reconstructs with its own measurements (O_i)."""
        return self.detect_sets[i - 1]

    def undetectable(self, i: int) -> FrozenSet[int]:
        """Complement of ``detectable`` (UO_i)."""
        return frozenset(range(1, self.n + 1)) - self.detect_sets[i - 1]


def diagonalize(plant: Plant, tol: float = 1e-9) -> ModalPlant:
    """Compute the modal transform of a plant with real distinct spectrum.

    Raises NonRealSpectrum if any eigenvalue has |imaginary part| > tol and
    RepeatedEigenvalue if two eigenvalues are within EPS_GAP of each other.
    """
    a = plant.a
    w, p = np.linalg.eig(a)
    if np.any(np.abs(w.imag) > tol):
        raise NonRealSpectrum(f"eigenvalues {w} are not real within tol={tol}")
    w = w.real.astype(float)
    p = p.real.astype(float)

    order = np.lexsort((-w, -np.abs(w)))
    w = w[order]
    p = p[:, order]

    gaps = np.abs(np.subtract.outer(w, w))[np.triu_indices(len(w), k=1)]
    if gaps.size and gaps.min() <= EPS_GAP:
        raise RepeatedEigenvalue(f"minimum eigenvalue gap {gaps.min():.3e} <= {EPS_GAP}")

    v = np.linalg.inv(p)   # z = V x diagonalizes: V A V^-1 = diag(w)
    v_inv = p
    cbar = tuple(c @ v_inv for c in plant.sensors)

    detect_sets = tuple(
        frozenset(
            j + 1
            for j in range(plant.n)
            if c.shape[0] > 0 and np.linalg.norm(c[:, j]) > EPS_COL
        )
        for c in cbar
    )
    unstable = frozenset(j + 1 for j in range(plant.n) if abs(w[j]) >= 1.0)
    all_nodes = range(1, plant.n_nodes + 1)
    consensus = frozenset(
        j for j in unstable if any(j not in detect_sets[i - 1] for i in all_nodes)
    )
    return ModalPlant(
        lambdas=w,
        v=v,
        v_inv=v_inv,
        cbar=cbar,
        detect_sets=detect_sets,
        unstable_set=unstable,
        consensus_set=consensus,
    )


def source_set(mp: ModalPlant, j: int) -> FrozenSet[int]:
    """Nodes whose measurements make mode j locally detectable (S_j)."""
    if not 1 <= j <= mp.n:
        raise DomainError(f"mode index {j} outside 1..{mp.n}")
    return frozenset(i for i in range(1, mp.n_nodes + 1) if j in mp.detect_sets[i - 1])


@dataclass(frozen=True)
class ObserverGains:
    """One-step Luenberger observer for a node's detectable subsystem.

    When the transformed measurement matrix has full column rank the gain
    is chosen so the error matrix is exactly gamma*I, i.e. every detectable
    mode contracts independently at gamma per step. Otherwise the gain is
    placed so the joint error dynamics has spectral radius gamma (modes
    are then coupled through the output).
    """

    node: int
    modes: Tuple[int, ...]
    m_o: np.ndarray
    cbar_o: np.ndarray
    gain: np.ndarray
    error_matrix: np.ndarray
    gamma: float
    radius: float
    decoupled: bool

    def gain_for(self, j: int) -> np.ndarray:
        """Gain row applied to the innovation for mode j."""
        if j not in self.modes:
            raise ModeNotDetectable(f"node {self.node} cannot detect mode {j}")
        return self.gain[self.modes.index(j)]

    def mode_contraction(self, j: int) -> float:
        """Per-step error contraction factor guaranteed for mode j."""
        if j not in self.modes:
            raise ModeNotDetectable(f"node {self.node} cannot detect mode {j}")
        return self.gamma if self.decoupled else self.radius


def design_local_observer(mp: ModalPlant, i: int, gamma_local: float = 0.5) -> ObserverGains:
    """Design the local observer of node i with contraction gamma_local.

    gamma_local = 0 gives a deadbeat observer (exact after one step) in the
    decoupled case; in the coupled case the poles are spread over tiny
    distinct values instead, since coincident poles cannot be assigned
    through a rank-deficient output map.
    """
    if not 0.0 <= gamma_local < 1.0:
        raise DomainError(f"gamma_local must be in [0,1), got {gamma_local}")
    modes = tuple(sorted(mp.detect_sets[i - 1]))
    n_modes = len(modes)
    r_i = mp.cbar[i - 1].shape[0]
    if n_modes == 0:
        return ObserverGains(
            node=i,
            modes=(),
            m_o=np.zeros((0, 0)),
            cbar_o=np.zeros((r_i, 0)),
            gain=np.zeros((0, r_i)),
            error_matrix=np.zeros((0, 0)),
            gamma=gamma_local,
            radius=0.0,
            decoupled=True,
        )
    idx = [j - 1 for j in modes]
    m_o = np.diag(mp.lambdas[idx])
    cbar_o = mp.cbar[i - 1][:, idx]

    if np.linalg.matrix_rank(cbar_o) == n_modes:
        gain = (m_o - gamma_local * np.eye(n_modes)) @ np.linalg.pinv(cbar_o)
        decoupled = True
    else:
        if gamma_local > 0.0:
            poles = gamma_local * np.linspace(1.0, 0.5, n_modes)
        else:
            poles = 1e-4 * np.arange(n_modes, dtype=float)
        placed = place_poles(m_o.T, cbar_o.T, poles)
        gain = placed.gain_matrix.T
        decoupled = False
    error_matrix = m_o - gain @ cbar_o
    radius = float(np.max(np.abs(np.linalg.eigvals(error_matrix)))) if n_modes else 0.0
    return ObserverGains(
        node=i,
        modes=modes,
        m_o=m_o,
        cbar_o=cbar_o,
        gain=gain,
        error_matrix=error_matrix,
        gamma=gamma_local,
        radius=radius,
        decoupled=decoupled,
    )


def observer_step(gains: ObserverGains, state: np.ndarray, y_i: np.ndarray) -> np.ndarray:
    """One-step Luenberger update of the detectable modes.

    ``state`` is the full modal estimate vector; entries for undetectable
    modes pass through untouched.
    """
    state = np.asarray(state, dtype=float)
    y_i = np.asarray(y_i, dtype=float).reshape(-1)
    if y_i.shape[0] != gains.cbar_o.shape[0]:
        raise DimensionMismatch(
            f"node {gains.node} expects {gains.cbar_o.shape[0]} measurements, got {y_i.shape[0]}"
        )
    out = state.copy()
    if not gains.modes:
        return out
    idx = [j - 1 for j in gains.modes]
    z_o = state[idx]
    out[idx] = gains.m_o @ z_o + gains.gain @ (y_i - gains.cbar_o @ z_o)
    return out
