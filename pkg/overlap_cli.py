"""Command-line front end: moments, bounds, sweeps, model generation and classic comparators."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

import data_files
import debug_log
from bounds import (
    BoundResult,
    Direction,
    ZeroVarianceError,
    degree_sweep,
    eckart_lower,
    first_order_bounds,
    mora_upper,
    threshold_decision,
    two_level_comparator,
)
from errors import InputError, NumericalError
from indicator import (
    ConstraintGrid,
    build_interval_indicator,
    build_threshold_indicator,
    discretize,
    exact_grid,
    level_windows,
)
from linalg import DenseSymmetricMatrix, StateVector, eigh, spectral_window
from moments import (
    Basis,
    MomentVector,
    ScalingWindow,
    chebyshev_moments,
    convert_moments,
    default_window,
    hankel_consistency_check,
    moments_from_spectrum,
    power_moments,
)
from run_config import (
    RunConfig,
    build_config,
    load_config,
    save_config,
    threads_from_env,
    with_overrides,
)
from spectrum import (
    SpectralModel,
    exact_overlap,
    gap_family,
    gen_cluster_model,
    spectral_from_matrix,
    threshold_targets,
)

PROFILE_TXT_OUTPUT_PATH = Path("/tmp/overlap_bounds_profile.txt")
PROFILE_HTML_OUTPUT_PATH = Path("/tmp/overlap_bounds_profile.html")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

BOUND_COLUMNS = (
    "degree",
    "direction",
    "raw_value",
    "clamped_value",
    "certified_margin",
    "lp_status",
    "basis",
    "grid_points",
)
SWEEP_COLUMNS = ("system_id", "gap", "degree", "direction", "value", "error", "certified_margin")


class _Profiler(Protocol):
    def start(self) -> None: ...

    def stop(self) -> None: ...

    def output_text(self, unicode: bool = False, color: bool = False) -> str: ...

    def output_html(self) -> str: ...


@dataclass
class LoadedInput:
    matrix: DenseSymmetricMatrix | None
    state: StateVector | None
    model: SpectralModel | None
    label: str
    measured: MomentVector | None = None


@dataclass
class BoundProblem:
    moments: MomentVector
    grid: ConstraintGrid
    exact: float | None


# --- argument parsing --------------------------------------------------------
def _int_list(text: str) -> list[int]:
    try:
        values = []
        for part in text.split(","):
            part = part.strip()
            if "..." in part or ".." in part:
                start, stop = part.replace("...", "..").split("..")
                values.extend(range(int(start), int(stop) + 1))
            elif part:
                values.append(int(part))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected integers like 1,2,5 or 1..8: {text!r}") from exc
    return values


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected numbers like 0.5,0.75: {text!r}") from exc


def _add_input_flags(parser: argparse.ArgumentParser, measured: bool = False) -> None:
    group = parser.add_argument_group("input")
    group.add_argument("--matrix", type=Path, help="Hamiltonian matrix text file")
    group.add_argument("--state", type=Path, help="trial state text file")
    group.add_argument("--spectrum", type=Path, help="spectral model JSON file")
    if measured:
        group.add_argument(
            "--moments", type=Path, help="measured moment vector JSON (replaces --matrix/--state)"
        )
    group.add_argument(
        "--normalize-state",
        action="store_true",
        default=None,
        help="rescale the trial state to unit norm",
    )


def _add_window_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--basis", choices=[basis.value for basis in Basis])
    parser.add_argument("--window-policy", choices=["gershgorin", "lanczos", "explicit"])
    parser.add_argument(
        "--window", nargs=2, type=float, metavar=("E_L", "E_U"), help="explicit window"
    )
    parser.add_argument("--lanczos-steps", type=int)


def _add_target_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--targets", type=_int_list, help="target level indices, e.g. 0 or 0,1")
    parser.add_argument("--weights", type=_float_list, help="per-target weights v_i")
    parser.add_argument("--target-mode", choices=["exact", "intervals", "threshold"])
    parser.add_argument("--threshold-energy", type=float, help="cutoff energy for threshold mode")
    parser.add_argument("--delta", type=float, help="overlap threshold to decide against")
    parser.add_argument("--gamma-minus", type=float)
    parser.add_argument("--gamma-plus", type=float)
    parser.add_argument("--target-points", type=int)
    parser.add_argument("--complement-points", type=int)
    parser.add_argument("--threshold-points", type=int)


def _add_bound_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--degrees", type=_int_list, help="polynomial degrees, e.g. 1,2 or 1..8")
    parser.add_argument(
        "--directions", type=lambda text: [part for part in text.split(",") if part]
    )
    parser.add_argument("--certify-factor", type=int)
    parser.add_argument("--certify-retries", type=int)
    parser.add_argument("--certify-tolerance", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overlap-bounds",
        description="Moment-based lower and upper bounds on eigenstate overlaps.",
    )
    parser.add_argument("--verbose", action="store_true", help="log to stderr")
    parser.add_argument("--trace", action="store_true", help="write a Hunter execution trace")
    parser.add_argument("--profile", action="store_true", help="profile with pyinstrument")
    parser.add_argument("--config", type=Path, help="run configuration JSON")
    parser.add_argument("--threads", type=int, help="worker threads for degree sweeps")
    parser.add_argument(
        "--save-config", type=Path, help="write the resolved run configuration to this file"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    moments = commands.add_parser(
        "moments",
        help="compute a moment vector (Chebyshev by default; --basis monomial for <H^n>)",
    )
    _add_input_flags(moments)
    _add_window_flags(moments)
    moments.add_argument("--degree", type=int, required=True)
    moments.add_argument("-o", "--output", type=Path)

    bound = commands.add_parser("bound", help="optimal bounds over a set of degrees")
    _add_input_flags(bound, measured=True)
    _add_window_flags(bound)
    _add_target_flags(bound)
    _add_bound_flags(bound)
    bound.add_argument("-o", "--output", type=Path, help="results CSV")
    bound.add_argument("--json-output", type=Path, help="JSON sidecar (default: next to CSV)")

    sweep = commands.add_parser("sweep", help="long-form bound table across systems and degrees")
    _add_input_flags(sweep, measured=True)
    _add_window_flags(sweep)
    _add_target_flags(sweep)
    _add_bound_flags(sweep)
    sweep.add_argument("--gap-family", type=_float_list, help="generate cluster models per gap")
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("-o", "--output", type=Path)

    gen = commands.add_parser("gen-model", help="write a synthetic cluster spectral model")
    gen.add_argument("--center2", type=float, default=0.2)
    gen.add_argument("--gap", type=float)
    gen.add_argument("--grid-lo", type=float)
    gen.add_argument("--seed", type=int)
    gen.add_argument("-o", "--output", type=Path)

    classic = commands.add_parser("classic", help="Eckart, two-moment and first-order bounds")
    _add_input_flags(classic, measured=True)
    classic.add_argument("--e0", type=float)
    classic.add_argument("--e1", type=float)
    classic.add_argument("--ed", type=float)
    classic.add_argument(
        "--two-level-family", type=_float_list, help="comparator report for P0 values on diag(0,1)"
    )
    classic.add_argument("-o", "--output", type=Path)
    return parser


_CONFIG_FLAGS = (
    "matrix",
    "state",
    "spectrum",
    "moments",
    "normalize_state",
    "targets",
    "weights",
    "target_mode",
    "threshold_energy",
    "delta",
    "degrees",
    "directions",
    "basis",
    "window_policy",
    "window",
    "lanczos_steps",
    "target_points",
    "complement_points",
    "threshold_points",
    "gamma_minus",
    "gamma_plus",
    "certify_factor",
    "certify_retries",
    "certify_tolerance",
    "output",
    "json_output",
    "seed",
    "threads",
)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """File values first, then environment, then explicit flags."""
    base = load_config(args.config) if args.config is not None else build_config({})
    overrides: dict[str, object] = {"threads": threads_from_env(base.threads)}
    for name in _CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return with_overrides(base, overrides)


# --- shared pipeline ---------------------------------------------------------
def load_input(config: RunConfig, need_model: bool = True) -> LoadedInput:
    if config.moments is not None:
        if config.matrix is not None or config.state is not None:
            raise InputError("Give either --moments or --matrix/--state, not both")
        measured = data_files.read_moments(config.moments)
        model = None
        if config.spectrum is not None:
            model = data_files.read_spectral_model(config.spectrum)
        return LoadedInput(None, None, model, config.moments.stem, measured)
    if config.spectrum is not None:
        if config.matrix is not None or config.state is not None:
            raise InputError("Give either --spectrum or --matrix/--state, not both")
        model = data_files.read_spectral_model(config.spectrum)
        return LoadedInput(None, None, model, config.spectrum.stem)
    if config.matrix is None or config.state is None:
        raise InputError("Input needs --spectrum, or both --matrix and --state")
    matrix = data_files.read_matrix(config.matrix)
    state = data_files.read_state(config.state, normalize=config.normalize_state)
    if matrix.n != state.n:
        raise InputError(f"Matrix has dimension {matrix.n}, state has {state.n}")
    model = spectral_from_matrix(matrix, state) if need_model else None
    return LoadedInput(matrix, state, model, config.matrix.stem)


def resolve_window(config: RunConfig, loaded: LoadedInput) -> ScalingWindow:
    if config.window_policy == "explicit":
        assert config.window is not None
        return ScalingWindow(*config.window)
    if loaded.measured is not None and loaded.measured.window is not None:
        return loaded.measured.window
    if loaded.matrix is not None:
        lower, upper = spectral_window(
            loaded.matrix, config.window_policy, loaded.state, config.lanczos_steps
        )
    elif loaded.model is not None:
        lower, upper = float(loaded.model.eigenvalues[0]), float(loaded.model.eigenvalues[-1])
    else:
        raise InputError(
            "Raw moments carry no window: pass --window-policy explicit --window E_L E_U "
            "or a --spectrum"
        )
    window = default_window(lower, upper)
    debug_log.get_logger().debug(
        "Window %s from %s policy: [%g, %g]",
        window.to_json_dict(),
        config.window_policy,
        lower,
        upper,
    )
    return window


def compute_moments(
    loaded: LoadedInput, basis: Basis, degree: int, window: ScalingWindow | None
) -> MomentVector:
    if loaded.measured is not None:
        return convert_moments(loaded.measured, basis, degree, window)
    if loaded.matrix is not None and loaded.state is not None:
        if basis is Basis.CHEBYSHEV:
            assert window is not None
            return chebyshev_moments(loaded.matrix, loaded.state, degree, window)
        return power_moments(loaded.matrix, loaded.state, degree, window)
    assert loaded.model is not None
    return moments_from_spectrum(loaded.model, degree, basis, window)


def build_grid(
    config: RunConfig, model: SpectralModel | None, window: ScalingWindow
) -> tuple[ConstraintGrid, float | None]:
    """Constraint grid for the configured target mode and the exact target value if known."""
    outer = (window.e_lower, window.e_upper)
    if config.target_mode == "threshold":
        assert config.threshold_energy is not None
        spec = build_threshold_indicator(config.threshold_energy, outer, config.threshold_points)
        grid = discretize(spec, window)
        exact = None
        if model is not None:
            below = threshold_targets(model, config.threshold_energy)
            exact = exact_overlap(model, below) if below else 0.0
        return grid, exact

    if model is None:
        raise InputError(f"Target mode {config.target_mode!r} needs the spectrum")
    exact = exact_overlap(model, config.targets, config.weights)
    if config.target_mode == "exact":
        return exact_grid(model, config.targets, window, config.weights), exact

    brackets = [
        (max(lo, window.e_lower), min(hi, window.e_upper))
        for lo, hi in level_windows(model.eigenvalues, config.gamma_minus, config.gamma_plus)
    ]
    spec = build_interval_indicator(brackets, config.targets, config.weights, outer)
    counts = [
        1
        if region.is_point
        else config.target_points
        if region.target
        else config.complement_points
        for region in spec.regions
    ]
    return discretize(spec, window, counts), exact


def prepare_bound_problem(config: RunConfig, loaded: LoadedInput) -> BoundProblem:
    window = resolve_window(config, loaded)
    moments = compute_moments(loaded, config.basis, config.max_degree, window)
    grid, exact = build_grid(config, loaded.model, window)
    return BoundProblem(moments=moments, grid=grid, exact=exact)


def run_bounds(config: RunConfig, problem: BoundProblem) -> list[BoundResult]:
    return degree_sweep(
        problem.moments,
        problem.grid,
        config.degrees,
        [Direction(direction) for direction in config.directions],
        factor=config.certify_factor,
        retries=config.certify_retries,
        tolerance=config.certify_tolerance,
        workers=config.threads,
    )


def _emit(text: str, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        data_files.atomic_write_text(output, text)


# --- subcommands -------------------------------------------------------------
def cmd_moments(config: RunConfig, degree: int) -> int:
    loaded = load_input(config, need_model=False)
    window: ScalingWindow | None = None
    if config.basis is Basis.CHEBYSHEV or config.window_policy == "explicit":
        window = resolve_window(config, loaded)
    moments = compute_moments(loaded, config.basis, degree, window)

    hankel = None
    if degree >= 2:
        monomial = compute_moments(loaded, Basis.MONOMIAL, degree, window)
        report = hankel_consistency_check(monomial)
        hankel = {"min_eigenvalue": report.min_eigenvalue, "passed": report.passed}
        status = "passed" if report.passed else "FAILED"
        message = f"hankel check {status} (min eigenvalue {report.min_eigenvalue:.6e})"
        print(message, file=sys.stderr)
    else:
        print("hankel check skipped (degree < 2)", file=sys.stderr)

    payload = {**moments.to_json_dict(), "hankel": hankel, "config": config.resolved()}
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", config.output)
    return EXIT_OK


def cmd_bound(config: RunConfig) -> int:
    loaded = load_input(config, need_model=config.target_mode != "threshold")
    problem = prepare_bound_problem(config, loaded)
    results = run_bounds(config, problem)

    rows = [
        (
            result.degree,
            result.direction.value,
            result.raw_value,
            result.clamped_value,
            result.certified_margin,
            result.lp_status.value,
            result.basis.value,
            result.grid_points,
        )
        for result in results
    ]
    _emit(data_files.format_csv(BOUND_COLUMNS, rows, config.resolved()), config.output)

    sidecar = config.json_output
    if sidecar is None and config.output is not None:
        sidecar = config.output.with_suffix(".json")
    if sidecar is not None:
        payload: dict[str, object] = {
            "config": config.resolved(),
            "window": problem.grid.window.to_json_dict(),
            "indicator": problem.grid.spec.to_json_dict(),
            "exact_overlap": problem.exact,
            "results": [result.to_json_dict() for result in results],
        }
        if config.delta is not None:
            payload["threshold_decisions"] = [
                {"degree": result.degree, "reached": threshold_decision(result, config.delta)}
                for result in results
                if result.direction is Direction.LOWER
            ]
        data_files.write_json(sidecar, payload)

    uncertified = [result for result in results if not result.certified]
    if uncertified:
        print(f"warning: {len(uncertified)} bound(s) left uncertified", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(config: RunConfig, gap_values: Sequence[float] | None) -> int:
    systems: list[tuple[str, str, LoadedInput]] = []
    if gap_values:
        for model in gap_family(gap_values, seed=config.seed):
            gap = model.metadata["gap"]
            loaded = LoadedInput(None, None, model, f"gap-{gap:g}")
            systems.append((loaded.label, f"{gap:g}", loaded))
    else:
        loaded = load_input(config, need_model=True)
        gap = loaded.model.metadata.get("gap") if loaded.model is not None else None
        systems.append((loaded.label, "" if gap is None else f"{gap:g}", loaded))

    rows = []
    for system_id, gap_label, loaded in systems:
        problem = prepare_bound_problem(config, loaded)
        for result in run_bounds(config, problem):
            error = "" if problem.exact is None else abs(result.raw_value - problem.exact)
            rows.append(
                (
                    system_id,
                    gap_label,
                    result.degree,
                    result.direction.value,
                    result.raw_value,
                    error,
                    result.certified_margin,
                )
            )
    _emit(data_files.format_csv(SWEEP_COLUMNS, rows, config.resolved()), config.output)
    return EXIT_OK


def cmd_gen_model(
    config: RunConfig, center2: float, gap: float | None, grid_lo: float | None
) -> int:
    model = gen_cluster_model(center2, gap=gap, grid_lo=grid_lo, seed=config.seed)
    payload = {**model.to_json_dict(), "config": config.resolved()}
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", config.output)
    return EXIT_OK


def _classic_energies(
    loaded: LoadedInput, e0: float | None, e1: float | None, ed: float | None
) -> tuple[float, float, float]:
    if loaded.matrix is not None:
        levels = np.unique(np.round(eigh(loaded.matrix).eigenvalues, 12))
    elif loaded.model is not None:
        levels = loaded.model.eigenvalues
    else:
        levels = np.array([])
    known = [float(value) for value in levels]
    e0 = e0 if e0 is not None else (known[0] if known else None)
    e1 = e1 if e1 is not None else (known[1] if len(known) > 1 else None)
    ed = ed if ed is not None else (known[-1] if len(known) > 1 else None)
    if e0 is None or e1 is None or ed is None:
        raise InputError("Classic bounds need E0, E1 and ED estimates (--e0/--e1/--ed)")
    return e0, e1, ed


def cmd_classic(
    config: RunConfig,
    energies: tuple[float | None, float | None, float | None],
    family: Sequence[float] | None,
) -> int:
    if family:
        rows = [
            (row.p0, row.eckart, row.mora_as_printed, row.mora_below_exact)
            for row in two_level_comparator(family)
        ]
        header = ("p0_exact", "eckart", "mora_as_printed", "mora_below_exact")
        text = "# literature comparator (as printed) on diag(0, 1)\n" + data_files.format_csv(
            header, rows, config.resolved()
        )
        _emit(text, config.output)
        return EXIT_OK

    loaded = load_input(config, need_model=False)
    moments = compute_moments(loaded, Basis.MONOMIAL, 2, None)
    mean, second = float(moments.values[1]), float(moments.values[2])
    e0, e1, ed = _classic_energies(loaded, *energies)
    eckart = eckart_lower(mean, e0, e1)
    try:
        mora: object = mora_upper(mean, second, e0)
    except ZeroVarianceError:
        mora = "undefined (zero variance)"
    first = first_order_bounds(mean, e0, e1, ed)
    rows = [
        ("mean", mean),
        ("second_moment", second),
        ("eckart", eckart),
        ("eckart_clamped", max(0.0, eckart)),
        ("mora_as_printed", mora),
        ("first_order_lower", first.lower),
        ("first_order_upper", first.upper),
        ("s", first.switch),
        ("trivial_lower_branch", first.trivial_lower),
    ]
    _emit(data_files.format_csv(("quantity", "value"), rows, config.resolved()), config.output)
    return EXIT_OK


def dispatch(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if args.save_config is not None:
        save_config(config, args.save_config)
        debug_log.get_logger().info("Saved run configuration to %s", args.save_config)
    if args.command == "moments":
        return cmd_moments(config, args.degree)
    if args.command == "bound":
        return cmd_bound(config)
    if args.command == "sweep":
        return cmd_sweep(config, args.gap_family)
    if args.command == "gen-model":
        return cmd_gen_model(config, args.center2, args.gap, args.grid_lo)
    if args.command == "classic":
        return cmd_classic(config, (args.e0, args.e1, args.ed), args.two_level_family)
    raise InputError(f"Unknown command {args.command!r}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        debug_log.enable_console(logging.DEBUG)
    if args.trace:
        debug_log.start_trace()
    profiler = _start_profiler() if args.profile else None
    try:
        return dispatch(args)
    except InputError as exc:
        debug_log.get_logger().error("Input error: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        debug_log.get_logger().error("Numerical failure: %s", exc)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    finally:
        _finalize_profiler(profiler)
        if args.trace:
            debug_log.stop_trace()


def _start_profiler() -> _Profiler | None:
    try:
        from pyinstrument import Profiler
    except ModuleNotFoundError:
        return None

    profiler = Profiler()
    profiler.start()
    return profiler


def _finalize_profiler(profiler: _Profiler | None) -> None:
    if profiler is None:
        return

    try:
        profiler.stop()
        PROFILE_TXT_OUTPUT_PATH.write_text(
            profiler.output_text(unicode=True, color=False), encoding="utf-8"
        )
        PROFILE_HTML_OUTPUT_PATH.write_text(profiler.output_html(), encoding="utf-8")
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
