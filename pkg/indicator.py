"""Exact and interval-valued indicator functions and their finite constraint grids."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

import settings
from debug_log import get_logger
from errors import InputError
from moments import ScalingWindow, rescale_energy
from spectrum import SpectralModel, resolve_weights


class GridCollisionError(InputError):
    pass


class IndicatorMode(str, Enum):
    EXACT_POINTS = "exact_points"
    INTERVALS = "intervals"


class GridProvenance(str, Enum):
    EXACT_SPECTRUM = "exact_spectrum"
    DISCRETIZED_INTERVALS = "discretized_intervals"


@dataclass(frozen=True)
class IndicatorRegion:
    lo: float
    hi: float
    value: float
    target: bool = False
    points: int | None = None

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi


@dataclass(frozen=True)
class WindowMerge:
    members: tuple[int, ...]
    lo: float
    hi: float
    value: float


@dataclass(frozen=True)
class IndicatorSpec:
    mode: IndicatorMode
    regions: tuple[IndicatorRegion, ...]
    outer: tuple[float, float] | None = None
    targets: tuple[int, ...] = ()
    merges: tuple[WindowMerge, ...] = ()

    def __post_init__(self) -> None:
        mode = IndicatorMode(self.mode)
        regions = tuple(self.regions)
        if not regions:
            raise InputError("Indicator needs at least one region")
        for region in regions:
            if not (math.isfinite(region.lo) and math.isfinite(region.hi)):
                raise InputError("Indicator supports must be finite")
            if region.lo > region.hi:
                raise InputError(f"Indicator region [{region.lo}, {region.hi}] is reversed")
            if not math.isfinite(region.value) or region.value < 0.0:
                raise InputError(f"Indicator values must be finite and >= 0, got {region.value}")
            if mode is IndicatorMode.EXACT_POINTS and not region.is_point:
                raise InputError("Exact-point indicators hold single energies only")
        for left, right in zip(regions, regions[1:]):
            touching = mode is IndicatorMode.INTERVALS and left.hi == right.lo
            if not (left.hi < right.lo or touching):
                raise InputError(
                    f"Indicator regions [{left.lo}, {left.hi}] and [{right.lo}, {right.hi}] "
                    "overlap or are out of order"
                )
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "regions", regions)

    @property
    def weight_cap(self) -> float:
        return max(region.value for region in self.regions)

    def value_at(self, energy: float, tolerance: float = 0.0) -> float | None:
        """Value of f at ``energy``; a jump point takes the value of the region above it."""
        for region in reversed(self.regions):
            if region.lo - tolerance <= energy <= region.hi + tolerance:
                return region.value
        return None

    def to_json_dict(self) -> dict[str, object]:
        return {
            "mode": self.mode.value,
            "regions": [
                {
                    "lo": region.lo,
                    "hi": region.hi,
                    "value": region.value,
                    "target": region.target,
                    "points": region.points,
                }
                for region in self.regions
            ],
            "outer": list(self.outer) if self.outer is not None else None,
            "targets": list(self.targets),
            "merges": [
                {"members": list(merge.members), "lo": merge.lo, "hi": merge.hi}
                for merge in self.merges
            ],
        }


@dataclass(frozen=True)
class ConstraintGrid:
    abscissae: np.ndarray
    values: np.ndarray
    provenance: GridProvenance
    region_counts: tuple[int, ...]
    window: ScalingWindow
    spec: IndicatorSpec

    @property
    def size(self) -> int:
        return int(self.abscissae.size)

    @property
    def weight_cap(self) -> float:
        return self.spec.weight_cap


def build_exact_indicator(
    model: SpectralModel, targets: Sequence[int], weights: Sequence[float] | None = None
) -> IndicatorSpec:
    """f(E_i) = v_i on target levels and 0 on every other level of the spectrum."""
    if model.size == 0:
        raise InputError("Cannot build an indicator on an empty spectrum")
    target_list = [int(index) for index in targets]
    resolved = resolve_weights(target_list, weights)
    for index in target_list:
        if not 0 <= index < model.size:
            raise InputError(f"Target index {index} outside spectrum of {model.size} levels")
    by_index = dict(zip(target_list, resolved))
    regions = tuple(
        IndicatorRegion(
            lo=float(energy),
            hi=float(energy),
            value=by_index.get(index, 0.0),
            target=index in by_index,
        )
        for index, energy in enumerate(model.eigenvalues)
    )
    return IndicatorSpec(
        mode=IndicatorMode.EXACT_POINTS,
        regions=regions,
        outer=(float(model.eigenvalues[0]), float(model.eigenvalues[-1])),
        targets=tuple(sorted(by_index)),
    )


def level_windows(
    energies: Sequence[float],
    gamma_minus: float = settings.GAMMA_MINUS,
    gamma_plus: float = settings.GAMMA_PLUS,
) -> list[tuple[float, float]]:
    """[E_i - gamma_minus * g_(i-1), E_i + gamma_plus * g_i] with g_i = E_(i+1) - E_i.

    The missing gaps at both ends reuse their neighbour: g_(-1) = g_0 and g_D = g_(D-1).
    """
    levels = np.asarray(energies, dtype=float)
    if levels.size < 2:
        raise InputError("Level windows need at least two energies")
    if np.any(np.diff(levels) <= 0.0):
        raise InputError("Level energies must be strictly ascending")
    if gamma_minus < 0.0 or gamma_plus < 0.0:
        raise InputError("Window scale factors must be non-negative")
    gaps = np.diff(levels)
    below = np.concatenate([[gaps[0]], gaps])
    above = np.concatenate([gaps, [gaps[-1]]])
    return [
        (float(energy - gamma_minus * lower), float(energy + gamma_plus * upper))
        for energy, lower, upper in zip(levels, below, above)
    ]


def _group_windows(windows: Sequence[tuple[float, float]]) -> list[list[int]]:
    order = sorted(range(len(windows)), key=lambda index: (windows[index][0], index))
    groups: list[list[int]] = []
    group_hi = -math.inf
    for index in order:
        lo, hi = windows[index]
        if groups and lo <= group_hi:
            groups[-1].append(index)
            group_hi = max(group_hi, hi)
        else:
            groups.append([index])
            group_hi = hi
    return groups


def build_interval_indicator(
    windows: Sequence[tuple[float, float]],
    targets: Sequence[int],
    weights: Sequence[float] | None = None,
    outer: tuple[float, float] | None = None,
) -> IndicatorSpec:
    """Approximate indicator over eigenvalue brackets.

    Each target window carries its weight; runs of non-target windows collapse into one
    zero-valued region, and the outermost runs stretch to ``outer``. Overlapping windows
    are merged, and a merged window holding a target turns every member into a target.
    """
    if not windows:
        raise InputError("Interval indicator needs at least one level window")
    window_list = [(float(lo), float(hi)) for lo, hi in windows]
    for lo, hi in window_list:
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise InputError(f"Invalid level window [{lo}, {hi}]")
    target_list = [int(index) for index in targets]
    resolved = resolve_weights(target_list, weights)
    for index in target_list:
        if not 0 <= index < len(window_list):
            raise InputError(f"Target index {index} outside {len(window_list)} level windows")
    weight_of = dict(zip(target_list, resolved))

    lowest = min(lo for lo, _ in window_list)
    highest = max(hi for _, hi in window_list)
    outer_lo, outer_hi = outer if outer is not None else (lowest, highest)
    if outer_lo > lowest or outer_hi < highest:
        raise InputError(
            f"Outer range [{outer_lo}, {outer_hi}] does not cover the level windows "
            f"[{lowest}, {highest}]"
        )

    groups = _group_windows(window_list)
    merges: list[WindowMerge] = []
    effective_targets: set[int] = set()
    grouped: list[tuple[float, float, float | None, tuple[int, ...]]] = []
    for group in groups:
        lo = min(window_list[index][0] for index in group)
        hi = max(window_list[index][1] for index in group)
        member_weights = {weight_of[index] for index in group if index in weight_of}
        value: float | None = None
        if member_weights:
            if max(member_weights) - min(member_weights) > 1e-12:
                raise InputError(
                    f"Overlapping windows {sorted(group)} carry different target weights"
                )
            value = max(member_weights)
            effective_targets.update(group)
        if len(group) > 1:
            merges.append(WindowMerge(tuple(sorted(group)), lo, hi, value or 0.0))
            get_logger().info(
                "Merged overlapping level windows %s into [%g, %g]%s",
                sorted(group),
                lo,
                hi,
                " as a multi-level target" if value is not None else "",
            )
        grouped.append((lo, hi, value, tuple(group)))

    regions: list[IndicatorRegion] = []
    run: list[tuple[float, float]] = []

    def flush_run(extend_lo: bool, extend_hi: bool) -> None:
        if not run:
            return
        lo = outer_lo if extend_lo else run[0][0]
        hi = outer_hi if extend_hi else run[-1][1]
        regions.append(IndicatorRegion(lo=lo, hi=hi, value=0.0, target=False))
        run.clear()

    started = False
    for lo, hi, value, _ in grouped:
        if value is None:
            run.append((lo, hi))
            continue
        flush_run(extend_lo=not started, extend_hi=False)
        regions.append(IndicatorRegion(lo=lo, hi=hi, value=value, target=True))
        started = True
    flush_run(extend_lo=not started, extend_hi=True)

    if not any(region.target for region in regions):
        get_logger().warning("Interval indicator has no target windows; f is identically 0")

    return IndicatorSpec(
        mode=IndicatorMode.INTERVALS,
        regions=tuple(regions),
        outer=(outer_lo, outer_hi),
        targets=tuple(sorted(effective_targets)),
        merges=tuple(merges),
    )


def build_threshold_indicator(
    cutoff: float,
    outer: tuple[float, float],
    count: int = settings.THRESHOLD_GRID_POINTS,
) -> IndicatorSpec:
    """Cumulative indicator: 1 on [outer_lo, cutoff), 0 on [cutoff, outer_hi].

    Both regions end at the cutoff, so the grid holds the cutoff twice (once per side)
    and a level sitting just above it cannot slip through a gap between grid points.
    The ``count`` points are shared between the two regions in proportion to their
    widths.
    """
    outer_lo, outer_hi = float(outer[0]), float(outer[1])
    cutoff = float(cutoff)
    if not outer_lo < outer_hi:
        raise InputError(f"Threshold range [{outer_lo}, {outer_hi}] is empty")
    if count < 2:
        raise InputError(f"Threshold grid needs at least 2 points, got {count}")
    regions: tuple[IndicatorRegion, ...]
    if cutoff <= outer_lo:
        regions = (IndicatorRegion(outer_lo, outer_hi, 0.0, points=count),)
    elif cutoff > outer_hi:
        regions = (IndicatorRegion(outer_lo, outer_hi, 1.0, target=True, points=count),)
    else:
        fraction = (cutoff - outer_lo) / (outer_hi - outer_lo)
        below = max(2, min(count - 1, round(fraction * (count - 1)) + 1))
        target = IndicatorRegion(outer_lo, cutoff, 1.0, target=True, points=below)
        if cutoff == outer_hi:
            rest = IndicatorRegion(outer_hi, outer_hi, 0.0)
        else:
            rest = IndicatorRegion(cutoff, outer_hi, 0.0, points=max(2, count - below + 1))
        regions = (target, rest)
    return IndicatorSpec(mode=IndicatorMode.INTERVALS, regions=regions, outer=(outer_lo, outer_hi))


def _default_count(region: IndicatorRegion) -> int:
    if region.is_point:
        return 1
    if region.points is not None:
        return region.points
    return settings.TARGET_REGION_POINTS if region.target else settings.COMPLEMENT_REGION_POINTS


def discretize(
    spec: IndicatorSpec,
    window: ScalingWindow,
    counts: Sequence[int] | None = None,
) -> ConstraintGrid:
    """Uniform grid per region (endpoints included), mapped into rescaled coordinates."""
    if spec.mode is IndicatorMode.EXACT_POINTS:
        resolved_counts = [1] * len(spec.regions)
        provenance = GridProvenance.EXACT_SPECTRUM
    else:
        if counts is not None and len(counts) != len(spec.regions):
            raise InputError(f"{len(spec.regions)} regions but {len(counts)} point counts")
        resolved_counts = [
            1 if region.is_point else int(counts[index]) if counts is not None
            else _default_count(region)
            for index, region in enumerate(spec.regions)
        ]
        provenance = GridProvenance.DISCRETIZED_INTERVALS

    abscissae: list[np.ndarray] = []
    values: list[np.ndarray] = []
    for region, count in zip(spec.regions, resolved_counts):
        if region.is_point:
            energies = np.array([region.lo])
        else:
            if count < 2:
                raise InputError(
                    f"Region [{region.lo}, {region.hi}] needs at least 2 points, got {count}"
                )
            energies = np.linspace(region.lo, region.hi, count)
        abscissae.append(np.asarray(rescale_energy(energies, window), dtype=float))
        values.append(np.full(energies.size, region.value))

    offsets = np.cumsum([0, *(len(chunk) for chunk in abscissae)])
    merged_x = np.concatenate(abscissae)
    merged_f = np.concatenate(values)
    steps = np.diff(merged_x)
    # a region ending where the next one starts repeats the shared abscissa
    jumps = np.zeros(steps.size, dtype=bool)
    for index in range(1, len(spec.regions)):
        if spec.regions[index - 1].hi == spec.regions[index].lo:
            jumps[offsets[index] - 1] = True
    colliding = (steps < 0.0) | ((steps == 0.0) & ~jumps)
    if np.any(colliding):
        position = int(np.flatnonzero(colliding)[0])
        left = int(np.searchsorted(offsets, position, side="right") - 1)
        right = int(np.searchsorted(offsets, position + 1, side="right") - 1)
        first, second = spec.regions[left], spec.regions[right]
        raise GridCollisionError(
            f"Grid abscissae collide between region {left} [{first.lo}, {first.hi}] "
            f"and region {right} [{second.lo}, {second.hi}]"
        )
    merged_x.setflags(write=False)
    merged_f.setflags(write=False)
    return ConstraintGrid(
        abscissae=merged_x,
        values=merged_f,
        provenance=provenance,
        region_counts=tuple(resolved_counts),
        window=window,
        spec=spec,
    )


def refine(grid: ConstraintGrid, factor: int) -> ConstraintGrid:
    """Subdivide every interval region ``factor`` times; the old points stay in the grid.

    A region of n points becomes (n - 1) * factor + 1 points, not n * factor: the
    endpoints are shared between the old and new grid. The 20 + 200 default grid
    therefore refines to 39 + 399 = 438 points at factor 2.
    """
    if factor < 2:
        raise InputError(f"Refinement factor must be >= 2, got {factor}")
    if grid.provenance is GridProvenance.EXACT_SPECTRUM:
        get_logger().warning("Refine requested on an exact-spectrum grid; returning it unchanged")
        return grid
    counts = [1 if count == 1 else (count - 1) * factor + 1 for count in grid.region_counts]
    return discretize(grid.spec, grid.window, counts)


def exact_grid(
    model: SpectralModel,
    targets: Sequence[int],
    window: ScalingWindow,
    weights: Sequence[float] | None = None,
) -> ConstraintGrid:
    return discretize(build_exact_indicator(model, targets, weights), window)
