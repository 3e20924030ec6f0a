"""Spectral models (eigenvalue/overlap pairs), synthetic cluster models and overlap oracles."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

import settings
from debug_log import get_logger
from errors import InputError, NumericalError
from linalg import DenseSymmetricMatrix, StateVector, eigh


class SpectrumGenerationError(NumericalError):
    pass


@dataclass(frozen=True)
class SpectralModel:
    eigenvalues: np.ndarray
    overlaps: np.ndarray
    complete: bool = True
    dropped_mass: float = 0.0
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        energies = np.array(self.eigenvalues, dtype=float).reshape(-1)
        weights = np.array(self.overlaps, dtype=float).reshape(-1)
        if energies.size < 1:
            raise InputError("Spectral model needs at least one level")
        if energies.size != weights.size:
            raise InputError(
                f"{energies.size} eigenvalues but {weights.size} overlaps in spectral model"
            )
        if not (np.all(np.isfinite(energies)) and np.all(np.isfinite(weights))):
            raise InputError("Spectral model entries must be finite")
        if np.any(np.diff(energies) <= 0.0):
            raise InputError("Spectral model eigenvalues must be strictly ascending")
        if np.any(weights < 0.0):
            raise InputError("Spectral model overlaps must be non-negative")
        total = math.fsum(weights)
        if self.complete and abs(total - 1.0) > settings.COMPLETE_TOL:
            raise InputError(f"Complete spectral model must sum to 1, got {total:.12f}")
        energies.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "eigenvalues", energies)
        object.__setattr__(self, "overlaps", weights)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @classmethod
    def from_levels(
        cls,
        energies: Sequence[float],
        overlaps: Sequence[float],
        complete: bool | None = None,
        tolerance: float = settings.DEGENERACY_TOL,
        metadata: Mapping[str, object] | None = None,
    ) -> SpectralModel:
        """Sort levels and merge near-degenerate ones, summing their overlaps."""
        energies_arr = np.asarray(energies, dtype=float).reshape(-1)
        overlaps_arr = np.asarray(overlaps, dtype=float).reshape(-1)
        if energies_arr.size != overlaps_arr.size:
            raise InputError(
                f"{energies_arr.size} eigenvalues but {overlaps_arr.size} overlaps "
                "in spectral model"
            )
        merged_energies, merged_overlaps = _merge_levels(energies_arr, overlaps_arr, tolerance)
        if complete is None:
            complete = abs(math.fsum(merged_overlaps) - 1.0) <= settings.COMPLETE_TOL
        return cls(
            eigenvalues=merged_energies,
            overlaps=merged_overlaps,
            complete=complete,
            metadata=metadata or {},
        )

    @classmethod
    def from_json_dict(cls, data: Mapping[str, object]) -> SpectralModel:
        try:
            energies = [float(value) for value in data["eigenvalues"]]  # type: ignore[union-attr]
            overlaps = [float(value) for value in data["overlaps"]]  # type: ignore[union-attr]
        except KeyError as exc:
            raise InputError(f"Spectral JSON is missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise InputError(f"Spectral JSON holds non-numeric entries: {exc}") from exc
        complete = data.get("complete")
        metadata = data.get("metadata")
        return cls.from_levels(
            energies,
            overlaps,
            complete=bool(complete) if complete is not None else None,
            metadata=metadata if isinstance(metadata, Mapping) else None,
        )

    def to_json_dict(self) -> dict[str, object]:
        payload: dict[str, object] = {
            "eigenvalues": [float(value) for value in self.eigenvalues],
            "overlaps": [float(value) for value in self.overlaps],
            "complete": self.complete,
        }
        if self.metadata:
            payload["metadata"] = dict(self.metadata)
        return payload

    @property
    def size(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def total_overlap(self) -> float:
        return math.fsum(self.overlaps)

    @property
    def spread(self) -> float:
        return float(self.eigenvalues[-1] - self.eigenvalues[0])


def _merge_levels(
    energies: np.ndarray, overlaps: np.ndarray, tolerance: float
) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(energies, kind="stable")
    energies = energies[order]
    overlaps = overlaps[order]
    if energies.size == 0:
        return energies, overlaps
    limit = tolerance * float(energies[-1] - energies[0])
    groups: list[list[int]] = [[0]]
    for index in range(1, energies.size):
        if energies[index] - energies[groups[-1][-1]] <= limit:
            groups[-1].append(index)
        else:
            groups.append([index])
    merged_energies = np.array([float(np.mean(energies[group])) for group in groups])
    merged_overlaps = np.array([math.fsum(overlaps[group]) for group in groups])
    if len(groups) != energies.size:
        get_logger().debug("Merged %d levels into %d", energies.size, len(groups))
    return merged_energies, merged_overlaps


def gen_cluster_model(
    center2: float = 0.2,
    gap: float | None = None,
    grid_lo: float | None = None,
    *,
    cluster1_center: float = settings.CLUSTER1_CENTER,
    cluster_size: int = settings.CLUSTER_LEVELS,
    cluster_spacing: float = settings.CLUSTER_SPACING,
    sigma: float | None = None,
    grid_count: int = settings.GRID_LEVELS,
    ground_weight: float = settings.GROUND_WEIGHT,
    cluster_weight: float = settings.CLUSTER_WEIGHT,
    seed: int = 0,
) -> SpectralModel:
    """Ground level at -1, two Gaussian-weighted clusters and a uniform grid up to 1.

    ``gap`` selects the gap-study grid [-1 + gap, 1]; otherwise ``grid_lo`` (default -0.9).
    Overlap mass left after the ground level and the clusters is spread evenly on the grid.
    """
    if not -1.0 < center2 < 1.0:
        raise InputError(f"Second cluster center must lie in (-1, 1), got {center2}")
    if gap is not None:
        if gap < 0.0:
            raise InputError(f"Gap must be non-negative, got {gap}")
        grid_lo = -1.0 + gap
    elif grid_lo is None:
        grid_lo = settings.DEFAULT_GRID_LO
    if not -1.0 <= grid_lo < 1.0:
        raise InputError(f"Grid start must lie in [-1, 1), got {grid_lo}")
    if cluster_size < 1 or grid_count < 2:
        raise InputError("Cluster size must be >= 1 and grid count >= 2")
    residual = 1.0 - ground_weight - 2.0 * cluster_weight
    if ground_weight < 0.0 or cluster_weight < 0.0 or residual < -settings.COMPLETE_TOL:
        raise InputError("Ground and cluster weights must be non-negative and sum to <= 1")
    residual = max(residual, 0.0)

    offsets = cluster_spacing * (np.arange(cluster_size) - 0.5 * (cluster_size - 1))
    width = cluster_spacing * (cluster_size - 1)
    envelope_sigma = sigma if sigma is not None else (0.5 * width if width > 0 else 1.0)

    def cluster(center: float) -> tuple[np.ndarray, np.ndarray]:
        envelope = np.exp(-(offsets**2) / (2.0 * envelope_sigma**2))
        return center + offsets, cluster_weight * envelope / math.fsum(envelope)

    first_e, first_p = cluster(cluster1_center)
    second_e, second_p = cluster(center2)
    grid_e = np.linspace(grid_lo, 1.0, grid_count)
    grid_p = np.full(grid_count, residual / grid_count)

    energies = np.concatenate([[-1.0], first_e, second_e, grid_e])
    overlaps = np.concatenate([[ground_weight], first_p, second_p, grid_p])
    energies = _separate_levels(energies, seed)

    order = np.argsort(energies, kind="stable")
    metadata = {
        "generator": "cluster",
        "center2": center2,
        "gap": gap,
        "grid_lo": grid_lo,
        "cluster1_center": cluster1_center,
        "cluster_size": cluster_size,
        "cluster_spacing": cluster_spacing,
        "sigma": envelope_sigma,
        "grid_count": grid_count,
        "ground_weight": ground_weight,
        "cluster_weight": cluster_weight,
        "seed": seed,
    }
    return SpectralModel(
        eigenvalues=energies[order],
        overlaps=overlaps[order] / math.fsum(overlaps),
        complete=True,
        metadata=metadata,
    )


def _separate_levels(energies: np.ndarray, seed: int) -> np.ndarray:
    """Nudge coinciding levels upward by a seeded jitter; the ground level never moves."""
    spread = float(np.max(energies) - np.min(energies)) or 1.0
    limit = settings.DEGENERACY_TOL * spread
    rng = np.random.default_rng(seed)
    energies = energies.copy()
    for attempt in range(settings.GENERATOR_RETRIES + 1):
        order = np.argsort(energies, kind="stable")
        close = np.flatnonzero(np.diff(energies[order]) <= limit)
        if close.size == 0:
            return energies
        if attempt == settings.GENERATOR_RETRIES:
            break
        movers = order[close + 1]
        movers = movers[movers != 0]
        energies[movers] += rng.uniform(0.5, 1.0, movers.size) * settings.GENERATOR_JITTER * spread
        get_logger().debug("Jittered %d coinciding levels (attempt %d)", movers.size, attempt + 1)
    raise SpectrumGenerationError("Could not separate coinciding eigenvalues in generated model")


def gap_family(gaps: Iterable[float], center2: float = 0.2, seed: int = 0) -> list[SpectralModel]:
    return [gen_cluster_model(center2, gap=gap, seed=seed) for gap in gaps]


def spectral_from_matrix(
    a: DenseSymmetricMatrix,
    phi: StateVector,
    floor: float = settings.OVERLAP_FLOOR,
    degeneracy_tol: float = settings.DEGENERACY_TOL,
) -> SpectralModel:
    """Exact (E_k, P_k) of a matrix and trial state; negligible overlaps are dropped."""
    if a.n != phi.n:
        raise InputError(f"Matrix has dimension {a.n}, state has {phi.n}")
    system = eigh(a)
    amplitudes = system.eigenvectors.T @ phi.amplitudes
    energies, overlaps = _merge_levels(system.eigenvalues, amplitudes**2, degeneracy_tol)
    keep = overlaps >= floor
    dropped = math.fsum(overlaps[~keep])
    if not np.any(keep):
        raise NumericalError("Every overlap fell below the floor")
    kept_overlaps = overlaps[keep]
    complete = abs(math.fsum(kept_overlaps) - 1.0) <= settings.COMPLETE_TOL
    get_logger().debug(
        "Spectral model: %d levels kept, %d dropped (mass %.3e)",
        int(np.sum(keep)),
        int(np.sum(~keep)),
        dropped,
    )
    return SpectralModel(
        eigenvalues=energies[keep],
        overlaps=kept_overlaps,
        complete=complete,
        dropped_mass=dropped,
    )


def _validated_targets(model: SpectralModel, targets: Iterable[int]) -> list[int]:
    indices = sorted(set(int(index) for index in targets))
    if not indices:
        raise InputError("Target set is empty")
    for index in indices:
        if not 0 <= index < model.size:
            raise InputError(f"Target index {index} outside spectrum of {model.size} levels")
    return indices


def resolve_weights(
    targets: Sequence[int], weights: Sequence[float] | None
) -> list[float]:
    if weights is None:
        return [1.0] * len(targets)
    if len(weights) != len(targets):
        raise InputError(f"{len(targets)} targets but {len(weights)} weights")
    resolved = [float(value) for value in weights]
    if any(not math.isfinite(value) or value < 0.0 for value in resolved):
        raise InputError("Target weights must be finite and non-negative")
    return resolved


def exact_overlap(
    model: SpectralModel, targets: Iterable[int], weights: Sequence[float] | None = None
) -> float:
    """Sum of v_i P_i over the targets (v_i = 1 by default)."""
    target_list = list(targets)
    resolved = resolve_weights(target_list, weights)
    indices = _validated_targets(model, target_list)
    by_index = dict(zip((int(index) for index in target_list), resolved))
    return math.fsum(by_index[index] * float(model.overlaps[index]) for index in indices)


def threshold_targets(model: SpectralModel, cutoff: float) -> list[int]:
    """Indices of levels strictly below the cutoff energy."""
    return [int(index) for index in np.flatnonzero(model.eigenvalues < cutoff)]
