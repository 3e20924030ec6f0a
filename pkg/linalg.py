"""Dense real-symmetric linear algebra: products, Jacobi eigensolver, spectral enclosures."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

import settings
from debug_log import get_logger
from errors import InputError, NumericalError


class DimensionMismatchError(InputError):
    pass


class EigenConvergenceError(NumericalError):
    def __init__(self, message: str, residual: float) -> None:
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class DenseSymmetricMatrix:
    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] < 1:
            raise InputError(f"Expected a non-empty square matrix, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise InputError("Matrix entries must be finite")
        scale = float(np.max(np.abs(entries)))
        asymmetry = float(np.max(np.abs(entries - entries.T)))
        if asymmetry > settings.SYMMETRY_TOL * scale:
            raise InputError(f"Matrix is not symmetric (max |A_jk - A_kj| = {asymmetry:.3e})")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> DenseSymmetricMatrix:
        return cls(np.asarray(rows, dtype=float))

    @classmethod
    def diagonal(cls, values: Sequence[float]) -> DenseSymmetricMatrix:
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def identity(cls, n: int) -> DenseSymmetricMatrix:
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    @property
    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    @property
    def trace(self) -> float:
        return math.fsum(np.diag(self.entries))


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amplitudes = np.array(self.amplitudes, dtype=float).reshape(-1)
        if amplitudes.size < 1 or not np.all(np.isfinite(amplitudes)):
            raise InputError("State vector must be non-empty and finite")
        norm = float(np.linalg.norm(amplitudes))
        if abs(norm - 1.0) > settings.NORMALIZATION_TOL:
            raise InputError(f"State vector is not normalized (norm = {norm:.12f})")
        amplitudes = amplitudes / norm
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def from_amplitudes(cls, values: Sequence[float], normalize: bool = False) -> StateVector:
        array = np.asarray(values, dtype=float).reshape(-1)
        if normalize:
            norm = float(np.linalg.norm(array))
            if norm == 0.0:
                raise InputError("Cannot normalize the zero vector")
            array = array / norm
        return cls(array)

    @property
    def n(self) -> int:
        return int(self.amplitudes.size)


@dataclass(frozen=True)
class Eigensystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int


@dataclass(frozen=True)
class LanczosResult:
    ritz_min: float
    ritz_max: float
    residual_min: float
    residual_max: float
    steps: int
    breakdown: bool

    def enclosure(self) -> tuple[float, float]:
        return self.ritz_min - self.residual_min, self.ritz_max + self.residual_max


def _as_vector(v: StateVector | np.ndarray | Sequence[float]) -> np.ndarray:
    if isinstance(v, StateVector):
        return v.amplitudes
    return np.asarray(v, dtype=float).reshape(-1)


def matvec(a: DenseSymmetricMatrix, v: StateVector | np.ndarray | Sequence[float]) -> np.ndarray:
    vector = _as_vector(v)
    if vector.size != a.n:
        raise DimensionMismatchError(f"Matrix has dimension {a.n}, vector has {vector.size}")
    return a.entries @ vector


def _round_robin_rounds(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pair indices so each round holds disjoint (p, q) pairs and a sweep covers all pairs."""
    players = list(range(n)) if n % 2 == 0 else [*range(n), -1]
    size = len(players)
    rounds: list[tuple[np.ndarray, np.ndarray]] = []
    for _ in range(size - 1):
        p_list: list[int] = []
        q_list: list[int] = []
        for i in range(size // 2):
            first, second = players[i], players[size - 1 - i]
            if first < 0 or second < 0:
                continue
            p_list.append(min(first, second))
            q_list.append(max(first, second))
        rounds.append((np.array(p_list, dtype=int), np.array(q_list, dtype=int)))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def eigh(a: DenseSymmetricMatrix, max_sweeps: int | None = None) -> Eigensystem:
    """Cyclic Jacobi eigensolver; eigenvalues ascending, eigenvectors in columns."""
    if a.n > settings.ORACLE_DIM_CAP:
        raise InputError(
            f"Dimension {a.n} exceeds the oracle cap of {settings.ORACLE_DIM_CAP}"
        )
    sweeps_allowed = settings.JACOBI_MAX_SWEEPS if max_sweeps is None else max_sweeps
    work = np.array(a.entries, dtype=float)
    vectors = np.eye(a.n)
    threshold = settings.JACOBI_OFF_TOL * a.frobenius_norm
    rounds = _round_robin_rounds(a.n)

    sweeps = 0
    while _off_norm(work) > threshold:
        if sweeps >= sweeps_allowed:
            residual = _off_norm(work)
            raise EigenConvergenceError(
                f"Jacobi did not converge after {sweeps} sweeps (off-norm {residual:.3e})",
                residual,
            )
        for p, q in rounds:
            apq = work[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (work[q, q] - work[p, p]) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            col_p = work[:, p].copy()
            col_q = work[:, q].copy()
            work[:, p] = c * col_p - s * col_q
            work[:, q] = s * col_p + c * col_q
            row_p = work[p, :].copy()
            row_q = work[q, :].copy()
            work[p, :] = c[:, None] * row_p - s[:, None] * row_q
            work[q, :] = s[:, None] * row_p + c[:, None] * row_q
            work[p, q] = 0.0
            work[q, p] = 0.0

            vec_p = vectors[:, p].copy()
            vec_q = vectors[:, q].copy()
            vectors[:, p] = c * vec_p - s * vec_q
            vectors[:, q] = s * vec_p + c * vec_q
        sweeps += 1

    eigenvalues = np.diag(work).copy()
    order = np.argsort(eigenvalues, kind="stable")
    get_logger().debug("Jacobi converged: n=%d sweeps=%d", a.n, sweeps)
    return Eigensystem(
        eigenvalues=eigenvalues[order],
        eigenvectors=vectors[:, order],
        sweeps=sweeps,
    )


def gershgorin(a: DenseSymmetricMatrix) -> tuple[float, float]:
    diag = np.diag(a.entries)
    radii = np.sum(np.abs(a.entries), axis=1) - np.abs(diag)
    return float(np.min(diag - radii)), float(np.max(diag + radii))


def lanczos_extremal(
    a: DenseSymmetricMatrix, v0: StateVector, m: int
) -> LanczosResult:
    """m-step Lanczos with full reorthogonalization; returns extremal Ritz values."""
    if v0.n != a.n:
        raise DimensionMismatchError(f"Matrix has dimension {a.n}, start vector has {v0.n}")
    if not 1 <= m <= a.n:
        raise InputError(f"Lanczos step count must lie in [1, {a.n}], got {m}")

    basis = np.zeros((a.n, m))
    alphas: list[float] = []
    betas: list[float] = []
    q = v0.amplitudes.copy()
    breakdown = False
    beta_last = 0.0
    for j in range(m):
        basis[:, j] = q
        w = a.entries @ q
        alpha = float(q @ w)
        alphas.append(alpha)
        w = w - basis[:, : j + 1] @ (basis[:, : j + 1].T @ w)
        w = w - basis[:, : j + 1] @ (basis[:, : j + 1].T @ w)
        beta_last = float(np.linalg.norm(w))
        if j == m - 1:
            break
        if beta_last < settings.LANCZOS_BREAKDOWN_TOL:
            breakdown = True
            get_logger().debug("Lanczos breakdown at step %d (beta=%.3e)", j + 1, beta_last)
            break
        betas.append(beta_last)
        q = w / beta_last

    steps = len(alphas)
    tridiagonal = np.diag(alphas)
    if betas:
        off = np.array(betas)
        tridiagonal += np.diag(off, k=1) + np.diag(off, k=-1)
    system = eigh(DenseSymmetricMatrix(tridiagonal))
    tail = 0.0 if breakdown else beta_last
    residuals = tail * np.abs(system.eigenvectors[-1, :])
    return LanczosResult(
        ritz_min=float(system.eigenvalues[0]),
        ritz_max=float(system.eigenvalues[-1]),
        residual_min=float(residuals[0]),
        residual_max=float(residuals[-1]),
        steps=steps,
        breakdown=breakdown,
    )


def spectral_window(
    a: DenseSymmetricMatrix,
    policy: str = "gershgorin",
    v0: StateVector | None = None,
    steps: int | None = None,
) -> tuple[float, float]:
    """Energy range used to build a scaling window, by policy name."""
    if policy == "gershgorin":
        return gershgorin(a)
    if policy == "lanczos":
        start = v0 if v0 is not None else StateVector(np.full(a.n, 1.0 / math.sqrt(a.n)))
        result = lanczos_extremal(a, start, min(a.n, steps or a.n))
        return result.enclosure()
    raise InputError(f"Unknown window policy {policy!r}")
