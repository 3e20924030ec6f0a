"""Hamiltonian moment vectors in the monomial and Chebyshev bases, and the rescaling map."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np
from numpy.polynomial import chebyshev

import settings
from debug_log import get_logger
from errors import InputError
from linalg import DenseSymmetricMatrix, StateVector, eigh, matvec

if TYPE_CHECKING:
    from spectrum import SpectralModel


class Basis(str, Enum):
    MONOMIAL = "monomial"
    CHEBYSHEV = "chebyshev"


@dataclass(frozen=True)
class ScalingWindow:
    e_lower: float
    e_upper: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.e_lower) and math.isfinite(self.e_upper)):
            raise InputError("Scaling window bounds must be finite")
        if not self.e_lower < self.e_upper:
            raise InputError(
                f"Scaling window needs E_L < E_U, got [{self.e_lower}, {self.e_upper}]"
            )

    @property
    def center(self) -> float:
        return 0.5 * (self.e_lower + self.e_upper)

    @property
    def width(self) -> float:
        return self.e_upper - self.e_lower

    def contains(self, energy: float) -> bool:
        return self.e_lower <= energy <= self.e_upper

    def to_json_dict(self) -> dict[str, float]:
        return {"E_L": self.e_lower, "E_U": self.e_upper}


IDENTITY_WINDOW = ScalingWindow(-1.0, 1.0)


@dataclass(frozen=True)
class MomentVector:
    basis: Basis
    values: np.ndarray
    window: ScalingWindow | None = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size < 1 or not np.all(np.isfinite(values)):
            raise InputError("Moment vector must hold at least <H^0> and be finite")
        if abs(values[0] - 1.0) > settings.MOMENT_NORM_TOL:
            raise InputError(f"Zeroth moment must equal 1, got {values[0]!r}")
        basis = Basis(self.basis)
        if basis is Basis.CHEBYSHEV and self.window is None:
            raise InputError("Chebyshev moments require a scaling window")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "basis", basis)

    @property
    def degree(self) -> int:
        return int(self.values.size - 1)

    @property
    def grid_window(self) -> ScalingWindow:
        """Window a constraint grid must use to pair with these moments."""
        return self.window if self.window is not None else IDENTITY_WINDOW

    def truncated(self, degree: int) -> np.ndarray:
        if degree > self.degree:
            raise InputError(f"Moments known to degree {self.degree}, requested {degree}")
        return self.values[: degree + 1]

    def to_json_dict(self) -> dict[str, object]:
        return {
            "basis": self.basis.value,
            "degree": self.degree,
            "window": self.window.to_json_dict() if self.window is not None else None,
            "values": [float(value) for value in self.values],
        }


@dataclass(frozen=True)
class HankelReport:
    min_eigenvalue: float
    passed: bool


def default_window(e_lower: float, e_upper: float) -> ScalingWindow:
    """Round an energy range outward to the configured number of decimals."""
    scale = 10**settings.WINDOW_DECIMALS
    lower = math.floor(e_lower * scale) / scale
    upper = math.ceil(e_upper * scale) / scale
    if lower >= upper:
        lower -= 1.0 / scale
        upper += 1.0 / scale
    return ScalingWindow(lower, upper)


def rescale_energy(energy: float | np.ndarray, window: ScalingWindow) -> float | np.ndarray:
    return (2.0 * energy - (window.e_lower + window.e_upper)) / window.width


def rescale_matrix(a: DenseSymmetricMatrix, window: ScalingWindow) -> DenseSymmetricMatrix:
    shifted = 2.0 * a.entries - (window.e_lower + window.e_upper) * np.eye(a.n)
    return DenseSymmetricMatrix(shifted / window.width)


def _check_dims(a: DenseSymmetricMatrix, phi: StateVector) -> None:
    if a.n != phi.n:
        raise InputError(f"Matrix has dimension {a.n}, state has {phi.n}")


def _check_degree(degree: int) -> None:
    if degree < 0:
        raise InputError(f"Moment degree must be non-negative, got {degree}")


def _dot(u: np.ndarray, v: np.ndarray) -> float:
    return math.fsum(u * v)


def power_moments(
    a: DenseSymmetricMatrix,
    phi: StateVector,
    degree: int,
    window: ScalingWindow | None = None,
) -> MomentVector:
    """<phi|A^n|phi> for n = 0..degree, split as <A^ceil(n/2) phi, A^floor(n/2) phi>.

    With a window the moments belong to the rescaled matrix and carry that window.
    """
    _check_dims(a, phi)
    _check_degree(degree)
    if window is not None:
        a = rescale_matrix(a, window)
    powers = [phi.amplitudes]
    for _ in range((degree + 1) // 2):
        powers.append(matvec(a, powers[-1]))
    values = [_dot(powers[(n + 1) // 2], powers[n // 2]) for n in range(degree + 1)]
    return MomentVector(Basis.MONOMIAL, np.array(values), window)


def chebyshev_moments(
    a: DenseSymmetricMatrix, phi: StateVector, degree: int, window: ScalingWindow
) -> MomentVector:
    """<phi|T_n(H_rs)|phi> through the three-term vector recurrence."""
    _check_dims(a, phi)
    _check_degree(degree)
    rescaled = rescale_matrix(a, window)
    previous = phi.amplitudes
    values = [_dot(phi.amplitudes, previous)]
    if degree >= 1:
        current = matvec(rescaled, previous)
        values.append(_dot(phi.amplitudes, current))
        for _ in range(2, degree + 1):
            previous, current = current, 2.0 * matvec(rescaled, current) - previous
            values.append(_dot(phi.amplitudes, current))
    return MomentVector(Basis.CHEBYSHEV, np.array(values), window)


def moments_from_spectrum(
    model: SpectralModel,
    degree: int,
    basis: Basis | str = Basis.MONOMIAL,
    window: ScalingWindow | None = None,
) -> MomentVector:
    """Overlap-weighted basis values: sum_k P_k b_n(E_k)."""
    _check_degree(degree)
    basis = Basis(basis)
    energies = np.asarray(model.eigenvalues, dtype=float)
    if basis is Basis.CHEBYSHEV:
        if window is None:
            raise InputError("Chebyshev moments require a scaling window")
        rows = chebyshev.chebvander(rescale_energy(energies, window), degree)
    elif window is not None:
        rows = np.polynomial.polynomial.polyvander(rescale_energy(energies, window), degree)
    else:
        rows = np.polynomial.polynomial.polyvander(energies, degree)
    if not model.complete:
        raise InputError(
            f"Moments need a complete spectral model (total overlap {model.total_overlap:.12f})"
        )
    weights = np.asarray(model.overlaps, dtype=float) / model.total_overlap
    values = [math.fsum(weights * rows[:, n]) for n in range(degree + 1)]
    return MomentVector(basis, np.array(values), window)


def rescale_moments(moments: MomentVector, window: ScalingWindow) -> MomentVector:
    """Monomial moments of H mapped to monomial moments of H_rs (binomial expansion)."""
    if moments.basis is not Basis.MONOMIAL or moments.window is not None:
        raise InputError("Only raw monomial moments can be rescaled")
    slope = 2.0 / window.width
    offset = -(window.e_lower + window.e_upper) / window.width
    raw = moments.values
    values = []
    for n in range(moments.degree + 1):
        terms = [
            math.comb(n, k) * slope**k * offset ** (n - k) * raw[k] for k in range(n + 1)
        ]
        values.append(math.fsum(terms))
    return MomentVector(Basis.MONOMIAL, np.array(values), window)


def monomial_to_chebyshev(moments: MomentVector) -> MomentVector:
    """Chebyshev moments from rescaled monomial moments via the power form of each T_n."""
    if moments.basis is not Basis.MONOMIAL or moments.window is None:
        raise InputError("Conversion needs monomial moments of a rescaled Hamiltonian")
    values = []
    for n in range(moments.degree + 1):
        coefficients = chebyshev.cheb2poly([0.0] * n + [1.0])
        values.append(math.fsum(coefficients * moments.values[: n + 1]))
    return MomentVector(Basis.CHEBYSHEV, np.array(values), moments.window)


def convert_moments(
    moments: MomentVector, basis: Basis, degree: int, window: ScalingWindow | None
) -> MomentVector:
    """Bring measured moments to the basis, degree and window a run asks for.

    Raw monomial moments are rescaled onto ``window`` first; Chebyshev moments are
    only accepted on the window they were taken on.
    """
    values = moments.truncated(degree)
    converted = MomentVector(moments.basis, values, moments.window)
    if window is None:
        if basis is not Basis.MONOMIAL or converted.basis is not Basis.MONOMIAL:
            raise InputError("Chebyshev moments need a scaling window")
        if converted.window is not None:
            raise InputError("Moments of a rescaled Hamiltonian cannot be used without a window")
        return converted
    if converted.basis is Basis.MONOMIAL and converted.window is None:
        converted = rescale_moments(converted, window)
    if converted.window != window:
        assert converted.window is not None
        raise InputError(
            f"Moments were taken on window {converted.window.to_json_dict()}, "
            f"the run uses {window.to_json_dict()}"
        )
    if basis is Basis.CHEBYSHEV and converted.basis is Basis.MONOMIAL:
        converted = monomial_to_chebyshev(converted)
    elif basis is not converted.basis:
        raise InputError("Chebyshev moments cannot be converted to the monomial basis")
    get_logger().debug(
        "Measured moments as %s degree %d on %s", basis.value, degree, window.to_json_dict()
    )
    return converted


def hankel_consistency_check(moments: MomentVector) -> HankelReport:
    """Valid moment sequences of a probability measure have a PSD Hankel matrix."""
    if moments.basis is not Basis.MONOMIAL:
        raise InputError("Hankel check applies to monomial moments")
    if moments.degree < 2:
        raise InputError("Hankel check needs moments up to at least degree 2")
    size = moments.degree // 2 + 1
    indices = np.add.outer(np.arange(size), np.arange(size))
    hankel = moments.values[indices]
    system = eigh(DenseSymmetricMatrix(hankel))
    min_eigenvalue = float(system.eigenvalues[0])
    passed = min_eigenvalue >= -settings.HANKEL_TOL
    if not passed:
        get_logger().warning("Hankel check failed: min eigenvalue %.3e", min_eigenvalue)
    return HankelReport(min_eigenvalue=min_eigenvalue, passed=passed)
