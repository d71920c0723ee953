"""Dense complex linear algebra for the small two-atom Hilbert spaces.

Everything here is immutable after construction. Bases are tiny (at most
36 product states), so all operators are stored as dense numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

CONTROL_LEVELS: tuple[str, ...] = ("0", "1", "r", "a", "a'", "b'")
TARGET_LEVELS: tuple[str, ...] = ("0", "1", "r", "b", "b'", "a'")

# Every non-qubit level is a Rydberg level and decays.
QUBIT_LEVELS = frozenset({"0", "1"})

HERMITIAN_RTOL = 1e-12


class DimensionError(ValueError):
    """Raised when operand dimensions do not agree."""


class NotHermitianError(ValueError):
    """Raised when a Hermitian-only routine receives a non-Hermitian matrix."""


@dataclass(frozen=True)
class Basis:
    """Ordered product basis of (control-level, target-level) labels.

    The product index is ``len(target_levels) * i_control + i_target``, i.e.
    the control index is major.
    """

    labels: tuple[tuple[str, str], ...]
    control_levels: tuple[str, ...] = CONTROL_LEVELS
    target_levels: tuple[str, ...] = TARGET_LEVELS
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple(tuple(lab) for lab in self.labels)
        if len(set(labels)) != len(labels):
            raise ValueError("basis labels must be unique")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    @classmethod
    def two_atom(cls) -> "Basis":
        """Full 36-state product basis of two six-level atoms."""
        return cls(tuple(product(CONTROL_LEVELS, TARGET_LEVELS)))

    @classmethod
    def subset(cls, labels: Sequence[tuple[str, str]]) -> "Basis":
        return cls(tuple(labels))

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: tuple[str, str]) -> int:
        try:
            return self._index[tuple(label)]
        except KeyError:
            raise KeyError(f"label {label!r} not in basis") from None

    def rydberg_count(self) -> np.ndarray:
        """Number of Rydberg-excited atoms in each basis state."""
        return np.array(
            [(c not in QUBIT_LEVELS) + (t not in QUBIT_LEVELS) for c, t in self.labels],
            dtype=float,
        )


# Reduced bases used by the effective models.
H2_BASIS = Basis.subset([("r", "1"), ("r", "r")])
H3_BASIS = Basis.subset([("r", "1"), ("r", "r"), ("a", "b")])
H5_BASIS = Basis.subset([("r", "1"), ("r", "r"), ("a", "b"), ("a'", "b'"), ("b'", "a'")])
QUBIT_LABELS: tuple[tuple[str, str], ...] = (("0", "0"), ("0", "1"), ("1", "0"), ("1", "1"))


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    basis: Basis | None = None

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        if self.basis is not None and len(self.basis) != amps.size:
            raise DimensionError(
                f"state has {amps.size} amplitudes but basis has {len(self.basis)} labels"
            )

    @classmethod
    def basis_state(cls, basis: Basis, label: tuple[str, str]) -> "StateVector":
        amps = np.zeros(len(basis), dtype=complex)
        amps[basis.index(label)] = 1.0
        return cls(amps, basis)

    @property
    def dimension(self) -> int:
        return self.amplitudes.size

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def amplitude(self, label: tuple[str, str]) -> complex:
        if self.basis is None:
            raise KeyError("state has no basis to resolve labels")
        return complex(self.amplitudes[self.basis.index(label)])

    def population(self, label: tuple[str, str]) -> float:
        return abs(self.amplitude(label)) ** 2


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense square complex matrix.

    When ``hermitian`` is declared, the constructor enforces
    ``max|H - H^dagger| <= 1e-12 * max|H|``.
    """

    entries: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"operator must be square, got shape {m.shape}")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)
        if self.hermitian and hermiticity_residual(m) > HERMITIAN_RTOL * max(np.abs(m).max(), 1e-300):
            raise NotHermitianError("matrix declared Hermitian is not")

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.entries.conj().T, self.hermitian)

    def restrict(self, full: Basis, sub: Basis) -> "OperatorMatrix":
        """Submatrix on the labels of ``sub``."""
        idx = [full.index(lab) for lab in sub.labels]
        return OperatorMatrix(self.entries[np.ix_(idx, idx)], self.hermitian)


def hermiticity_residual(m: np.ndarray) -> float:
    return float(np.abs(m - m.conj().T).max()) if m.size else 0.0


def matvec(op: OperatorMatrix, psi: StateVector) -> StateVector:
    if op.dimension != psi.dimension:
        raise DimensionError(
            f"operator dimension {op.dimension} does not match state dimension {psi.dimension}"
        )
    return StateVector(op.entries @ psi.amplitudes, psi.basis)


def inner(phi: StateVector, psi: StateVector) -> complex:
    """<phi|psi>, antilinear in the first argument."""
    if phi.dimension != psi.dimension:
        raise DimensionError("inner product of states with different dimensions")
    return complex(np.vdot(phi.amplitudes, psi.amplitudes))


def eig_hermitian(
    op: OperatorMatrix, tol: float = 1e-12, max_sweeps: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi rotations.

    Parameters
    ----------
    op : OperatorMatrix
        Must be declared Hermitian, dimension <= 36.
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm falls below
        ``tol * ||H||_F``.

    Returns
    -------
    eigenvalues : ndarray
        Sorted ascending, real.
    eigenvectors : ndarray
        Orthonormal columns; column ``k`` belongs to ``eigenvalues[k]``.
    """
    if not op.hermitian:
        raise NotHermitianError("eig_hermitian requires an operator declared Hermitian")
    n = op.dimension
    if n > 36:
        raise DimensionError(f"eig_hermitian supports dimension <= 36, got {n}")
    a = np.array(op.entries, dtype=complex)
    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    if scale == 0.0 or n == 1:
        return np.real(np.diag(a)).copy(), v

    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                tau = (aqq - app) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                # Columns p, q of the unitary rotation J.
                jp = (c, -s * np.conj(phase))
                jq = (s * phase, c)
                col_p = a[:, p] * jp[0] + a[:, q] * jp[1]
                col_q = a[:, p] * jq[0] + a[:, q] * jq[1]
                a[:, p], a[:, q] = col_p, col_q
                row_p = np.conj(jp[0]) * a[p, :] + np.conj(jp[1]) * a[q, :]
                row_q = np.conj(jq[0]) * a[p, :] + np.conj(jq[1]) * a[q, :]
                a[p, :], a[q, :] = row_p, row_q
                a[p, q] = a[q, p] = 0.0
                a[p, p], a[q, q] = a[p, p].real, a[q, q].real
                vp = v[:, p] * jp[0] + v[:, q] * jp[1]
                vq = v[:, p] * jq[0] + v[:, q] * jq[1]
                v[:, p], v[:, q] = vp, vq
    else:
        raise RuntimeError("Jacobi eigen-solver did not converge")

    w = np.real(np.diag(a))
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]
