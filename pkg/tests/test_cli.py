"""End-to-end tests for the overlap-bounds command line."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from overlap_cli import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, build_parser, main, resolve_config
from run_config import THREADS_ENV


def csv_rows(text: str) -> list[dict[str, str]]:
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


@pytest.fixture
def two_level_args(fixtures_path: Path) -> list[str]:
    return [
        "--matrix",
        str(fixtures_path / "two_level.mat"),
        "--state",
        str(fixtures_path / "two_level.vec"),
    ]


@pytest.fixture
def s3_args(fixtures_path: Path) -> list[str]:
    return ["--spectrum", str(fixtures_path / "s3.json")]


class TestConfigResolution:
    def test_flags_override_file_and_environment(
        self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        config_path = tmp_path / "run.json"
        config_path.write_text(json.dumps({"degrees": [1, 2, 3], "seed": 5}), encoding="utf-8")
        monkeypatch.setenv(THREADS_ENV, "3")
        args = build_parser().parse_args(["--config", str(config_path), "bound", "--degrees", "2"])
        config = resolve_config(args)
        assert config.degrees == [2]
        assert config.seed == 5
        assert config.threads == 3

        args = build_parser().parse_args(["--threads", "2", "bound"])
        assert resolve_config(args).threads == 2

    def test_degree_range_syntax(self) -> None:
        args = build_parser().parse_args(["bound", "--degrees", "1..4,6"])
        assert args.degrees == [1, 2, 3, 4, 6]

    def test_window_accepts_negative_bounds(self) -> None:
        argv = ["bound", "--window-policy", "explicit", "--window", "-2.5", "1"]
        config = resolve_config(build_parser().parse_args(argv))
        assert config.window == (-2.5, 1.0)

    def test_save_config_replays(
        self, s3_args: list[str], tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        saved = tmp_path / "run.json"
        argv = ["bound", *s3_args, "--degrees", "2", "--targets", "1"]
        assert main(["--save-config", str(saved), *argv]) == EXIT_OK
        first = capsys.readouterr().out
        stored = json.loads(saved.read_text(encoding="utf-8"))
        assert stored["degrees"] == [2]
        assert stored["targets"] == [1]

        assert main(["--config", str(saved), "bound"]) == EXIT_OK
        assert capsys.readouterr().out == first


class TestMomentsCommand:
    def test_help_names_monomial_basis(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv("COLUMNS", "200")
        text = " ".join(build_parser().format_help().split())
        assert "--basis monomial for <H^n>" in text

    def test_two_level_monomial(
        self, two_level_args: list[str], capsys: pytest.CaptureFixture[str]
    ) -> None:
        code = main(["moments", *two_level_args, "--basis", "monomial", "--degree", "2"])
        assert code == EXIT_OK
        captured = capsys.readouterr()
        payload = json.loads(captured.out)
        assert payload["values"] == pytest.approx([1.0, 0.25, 0.25], abs=1e-15)
        assert payload["hankel"]["passed"]
        assert "hankel check passed" in captured.err

    def test_s3_spectrum(self, s3_args: list[str], capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["moments", *s3_args, "--basis", "monomial", "--degree", "3"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["values"] == pytest.approx([1.0, -0.3, 0.7, -0.3], abs=1e-14)
        assert payload["window"] is None

    def test_degree_zero(self, s3_args: list[str], capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["moments", *s3_args, "--basis", "monomial", "--degree", "0"]) == EXIT_OK
        captured = capsys.readouterr()
        assert json.loads(captured.out)["values"] == [1.0]
        assert "skipped" in captured.err

    def test_chebyshev_output_file(self, s3_args: list[str], tmp_path: Path) -> None:
        output = tmp_path / "moments.json"
        assert main(["moments", *s3_args, "--degree", "2", "-o", str(output)]) == EXIT_OK
        payload = json.loads(output.read_text(encoding="utf-8"))
        assert payload["basis"] == "chebyshev"
        assert payload["window"] == {"E_L": -1.0, "E_U": 1.0}
        assert payload["values"] == pytest.approx([1.0, -0.3, 0.4], abs=1e-14)


class TestBoundCommand:
    def test_s3_exact_bounds(self, s3_args: list[str], tmp_path: Path) -> None:
        output = tmp_path / "bounds.csv"
        code = main(["bound", *s3_args, "--degrees", "1,2", "-o", str(output)])
        assert code == EXIT_OK
        text = output.read_text(encoding="utf-8")
        assert text.startswith("# config=")
        rows = csv_rows(text)
        assert [(row["degree"], row["direction"]) for row in rows] == [
            ("1", "lower"),
            ("1", "upper"),
            ("2", "lower"),
            ("2", "upper"),
        ]
        values = [float(row["raw_value"]) for row in rows]
        assert values == pytest.approx([0.3, 0.65, 0.5, 0.5], abs=1e-9)
        assert {row["lp_status"] for row in rows} == {"optimal"}

        sidecar = json.loads(output.with_suffix(".json").read_text(encoding="utf-8"))
        assert sidecar["exact_overlap"] == pytest.approx(0.5)
        assert len(sidecar["results"]) == 4
        assert sidecar["config"]["degrees"] == [1, 2]

    def test_all_targets_give_one(
        self, s3_args: list[str], capsys: pytest.CaptureFixture[str]
    ) -> None:
        assert main(["bound", *s3_args, "--targets", "0,1,2", "--degrees", "1"]) == EXIT_OK
        rows = csv_rows(capsys.readouterr().out)
        assert [float(row["raw_value"]) for row in rows] == pytest.approx([1.0, 1.0], abs=1e-9)

    def test_interval_targets_bracket_exact_overlap(
        self, s3_args: list[str], capsys: pytest.CaptureFixture[str]
    ) -> None:
        code = main(["bound", *s3_args, "--target-mode", "intervals", "--degrees", "1,2"])
        assert code == EXIT_OK
        rows = csv_rows(capsys.readouterr().out)
        for row in rows:
            value = float(row["raw_value"])
            if row["direction"] == "lower":
                assert value <= 0.5 + 1e-7
            else:
                assert value >= 0.5 - 1e-7
            assert float(row["certified_margin"]) <= 1e-6

    def test_threshold_decisions_in_sidecar(self, s3_args: list[str], tmp_path: Path) -> None:
        sidecar = tmp_path / "run.json"
        code = main(
            ["bound", *s3_args, "--degrees", "1,2", "--delta", "0.4", "--json-output", str(sidecar)]
        )
        assert code == EXIT_OK
        decisions = json.loads(sidecar.read_text(encoding="utf-8"))["threshold_decisions"]
        assert decisions == [{"degree": 1, "reached": False}, {"degree": 2, "reached": True}]

    def test_unbounded_program_exits_numerical(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        matrix = tmp_path / "h.mat"
        matrix.write_text("2\n-0.5 0\n0 0.5\n", encoding="utf-8")
        state = tmp_path / "s.vec"
        state.write_text("0.8\n0.6\n", encoding="utf-8")
        code = main(
            [
                "bound",
                "--matrix",
                str(matrix),
                "--state",
                str(state),
                "--target-mode",
                "threshold",
                "--threshold-energy",
                "0.25",
                "--threshold-points",
                "3",
                "--window-policy",
                "explicit",
                "--window",
                "-1",
                "1",
                "--degrees",
                "3",
            ]
        )
        assert code == EXIT_NUMERICAL
        assert "refine the grid or lower the degree" in capsys.readouterr().err

    def test_measured_monomial_moments(
        self, s3_args: list[str], tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        measured = tmp_path / "measured.json"
        argv = ["moments", *s3_args, "--basis", "monomial", "--degree", "2", "-o", str(measured)]
        assert main(argv) == EXIT_OK
        capsys.readouterr()

        code = main(["bound", "--moments", str(measured), *s3_args, "--degrees", "1,2"])
        assert code == EXIT_OK
        rows = csv_rows(capsys.readouterr().out)
        values = [float(row["raw_value"]) for row in rows]
        assert values == pytest.approx([0.3, 0.65, 0.5, 0.5], abs=1e-9)
        assert {row["basis"] for row in rows} == {"chebyshev"}

    def test_measured_moments_threshold_without_spectrum(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        measured = tmp_path / "measured.json"
        payload = {"basis": "monomial", "values": [1.0, -0.3, 0.7], "window": None}
        measured.write_text(json.dumps(payload), encoding="utf-8")
        argv = ["bound", "--moments", str(measured), "--target-mode", "threshold"]
        argv += ["--threshold-energy", "0.5", "--degrees", "1,2"]

        assert main(argv) == EXIT_INPUT
        assert "carry no window" in capsys.readouterr().err

        assert main([*argv, "--window-policy", "explicit", "--window", "-1", "1"]) == EXIT_OK
        for row in csv_rows(capsys.readouterr().out):
            value = float(row["raw_value"])
            if row["direction"] == "lower":
                assert value <= 0.8 + 1e-6
            else:
                assert value >= 0.8 - 1e-6

    def test_measured_moments_window_mismatch(
        self, s3_args: list[str], tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        measured = tmp_path / "measured.json"
        argv = ["moments", *s3_args, "--window-policy", "explicit", "--window", "-2", "2"]
        assert main([*argv, "--degree", "2", "-o", str(measured)]) == EXIT_OK
        capsys.readouterr()

        explicit = ["--window-policy", "explicit", "--window", "-1", "1"]
        code = main(["bound", "--moments", str(measured), *s3_args, *explicit, "--degrees", "1"])
        assert code == EXIT_INPUT
        assert "taken on window" in capsys.readouterr().err

        # without an explicit window the file's own window is used
        assert main(["bound", "--moments", str(measured), *s3_args, "--degrees", "1"]) == EXIT_OK

    def test_measured_moments_too_short(self, s3_args: list[str], tmp_path: Path) -> None:
        measured = tmp_path / "measured.json"
        payload = {"basis": "monomial", "values": [1.0, -0.3], "window": None}
        measured.write_text(json.dumps(payload), encoding="utf-8")
        argv = ["bound", "--moments", str(measured), *s3_args, "--degrees", "1,2"]
        assert main(argv) == EXIT_INPUT

    def test_moments_and_matrix_are_exclusive(
        self, two_level_args: list[str], tmp_path: Path
    ) -> None:
        measured = tmp_path / "measured.json"
        measured.write_text(json.dumps({"basis": "monomial", "values": [1.0]}), encoding="utf-8")
        assert main(["bound", "--moments", str(measured), *two_level_args]) == EXIT_INPUT

    def test_missing_state_exits_input(
        self, fixtures_path: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        code = main(
            [
                "bound",
                "--matrix",
                str(fixtures_path / "two_level.mat"),
                "--state",
                str(tmp_path / "absent.vec"),
            ]
        )
        assert code == EXIT_INPUT
        assert "absent.vec" in capsys.readouterr().err

    def test_spectrum_and_matrix_are_exclusive(
        self, s3_args: list[str], two_level_args: list[str]
    ) -> None:
        assert main(["bound", *s3_args, *two_level_args]) == EXIT_INPUT

    def test_invalid_configuration_exits_input(self, s3_args: list[str]) -> None:
        assert main(["bound", *s3_args, "--targets", "0,1", "--weights", "1"]) == EXIT_INPUT


class TestGenModelCommand:
    def test_round_trip_into_bound(self, tmp_path: Path) -> None:
        model_path = tmp_path / "cluster.json"
        assert main(["gen-model", "--center2", "0.5", "-o", str(model_path)]) == EXIT_OK
        model = json.loads(model_path.read_text(encoding="utf-8"))
        assert len(model["eigenvalues"]) == 30
        assert model["metadata"]["center2"] == 0.5

        output = tmp_path / "bounds.csv"
        code = main(
            ["bound", "--spectrum", str(model_path), "--degrees", "1..4", "-o", str(output)]
        )
        assert code == EXIT_OK
        for row in csv_rows(output.read_text(encoding="utf-8")):
            value = float(row["raw_value"])
            if row["direction"] == "lower":
                assert value <= 0.4 + 1e-7
            else:
                assert value >= 0.4 - 1e-7


class TestClassicCommand:
    def test_s3_table(self, s3_args: list[str], capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["classic", *s3_args]) == EXIT_OK
        table = {row["quantity"]: row["value"] for row in csv_rows(capsys.readouterr().out)}
        assert float(table["eckart"]) == pytest.approx(0.3)
        assert float(table["mora_as_printed"]) == pytest.approx(0.4016, abs=1e-4)
        assert float(table["first_order_lower"]) == pytest.approx(0.3)
        assert float(table["first_order_upper"]) == pytest.approx(0.65)
        assert table["trivial_lower_branch"] == "False"

    def test_eigenstate_has_undefined_two_moment_bound(
        self, fixtures_path: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        state = tmp_path / "ground.vec"
        state.write_text("1.0\n0.0\n", encoding="utf-8")
        code = main(
            ["classic", "--matrix", str(fixtures_path / "two_level.mat"), "--state", str(state)]
        )
        assert code == EXIT_OK
        table = {row["quantity"]: row["value"] for row in csv_rows(capsys.readouterr().out)}
        assert table["mora_as_printed"] == "undefined (zero variance)"
        assert float(table["eckart"]) == pytest.approx(1.0)

    def test_two_level_family(self, capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["classic", "--two-level-family", "0.5,0.75,0.9"]) == EXIT_OK
        text = capsys.readouterr().out
        assert text.startswith("# literature comparator (as printed) on diag(0, 1)\n")
        rows = csv_rows(text)
        assert [float(row["eckart"]) for row in rows] == pytest.approx([0.5, 0.75, 0.9])
        assert float(rows[2]["mora_as_printed"]) == pytest.approx(1.0 / 18.0)
        assert rows[2]["mora_below_exact"] == "True"

    def test_measured_moments(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        measured = tmp_path / "measured.json"
        payload = {"basis": "monomial", "values": [1.0, -0.3, 0.7], "window": None}
        measured.write_text(json.dumps(payload), encoding="utf-8")
        argv = ["classic", "--moments", str(measured), "--e0", "-1", "--e1", "0", "--ed", "1"]
        assert main(argv) == EXIT_OK
        table = {row["quantity"]: row["value"] for row in csv_rows(capsys.readouterr().out)}
        assert float(table["mean"]) == pytest.approx(-0.3)
        assert float(table["eckart"]) == pytest.approx(0.3)
        assert float(table["first_order_upper"]) == pytest.approx(0.65)

    def test_missing_energies(self, tmp_path: Path) -> None:
        matrix = tmp_path / "one.mat"
        matrix.write_text("1\n0.5\n", encoding="utf-8")
        state = tmp_path / "one.vec"
        state.write_text("1.0\n", encoding="utf-8")
        assert main(["classic", "--matrix", str(matrix), "--state", str(state)]) == EXIT_INPUT


class TestSweepCommand:
    GAPS = "0.05,0.1,0.2,0.4"

    def test_gap_family_table(self, tmp_path: Path) -> None:
        output = tmp_path / "sweep.csv"
        code = main(["sweep", "--gap-family", self.GAPS, "--degrees", "1..8", "-o", str(output)])
        assert code == EXIT_OK
        rows = csv_rows(output.read_text(encoding="utf-8"))
        assert len(rows) == 64
        assert {row["system_id"] for row in rows} == {"gap-0.05", "gap-0.1", "gap-0.2", "gap-0.4"}
        errors = np.array([float(row["error"]) for row in rows])
        assert np.all(errors >= 0.0)

        for system in ("gap-0.05", "gap-0.4"):
            lower = [
                float(row["value"])
                for row in rows
                if row["system_id"] == system and row["direction"] == "lower"
            ]
            assert all(b >= a - 1e-7 for a, b in zip(lower, lower[1:]))

    def test_rerun_is_byte_identical(self, tmp_path: Path) -> None:
        output = tmp_path / "sweep.csv"
        argv = ["sweep", "--gap-family", self.GAPS, "--degrees", "1..8", "-o", str(output)]
        assert main(argv) == EXIT_OK
        first = output.read_bytes()
        assert main(argv) == EXIT_OK
        assert output.read_bytes() == first

    def test_threads_do_not_change_rows(self, tmp_path: Path) -> None:
        serial = tmp_path / "serial.csv"
        threaded = tmp_path / "threaded.csv"
        base = ["sweep", "--gap-family", "0.1,0.2", "--degrees", "1..6"]
        assert main([*base, "-o", str(serial)]) == EXIT_OK
        assert main(["--threads", "4", *base, "-o", str(threaded)]) == EXIT_OK
        assert csv_rows(serial.read_text(encoding="utf-8")) == csv_rows(
            threaded.read_text(encoding="utf-8")
        )

    def test_spectrum_input(self, s3_args: list[str], capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["sweep", *s3_args, "--degrees", "1,2"]) == EXIT_OK
        rows = csv_rows(capsys.readouterr().out)
        assert {row["system_id"] for row in rows} == {"s3"}
        assert [float(row["error"]) for row in rows] == pytest.approx(
            [0.2, 0.15, 0.0, 0.0], abs=1e-9
        )


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_random_systems_bracket_exact_overlap(seed: int, tmp_path: Path) -> None:
    rng = np.random.default_rng(seed)
    n = 24
    raw = rng.standard_normal((n, n))
    matrix = (raw + raw.T) / 2.0
    state = rng.standard_normal(n)
    matrix_path = tmp_path / "h.mat"
    matrix_path.write_text(
        f"{n}\n" + "\n".join(" ".join(repr(float(v)) for v in row) for row in matrix) + "\n",
        encoding="utf-8",
    )
    state_path = tmp_path / "s.vec"
    state_path.write_text("\n".join(repr(float(v)) for v in state) + "\n", encoding="utf-8")
    output = tmp_path / "bounds.csv"
    code = main(
        [
            "bound",
            "--matrix",
            str(matrix_path),
            "--state",
            str(state_path),
            "--normalize-state",
            "--degrees",
            "1..6",
            "-o",
            str(output),
        ]
    )
    assert code == EXIT_OK
    exact = json.loads(output.with_suffix(".json").read_text(encoding="utf-8"))["exact_overlap"]
    for row in csv_rows(output.read_text(encoding="utf-8")):
        value = float(row["raw_value"])
        if row["direction"] == "lower":
            assert value <= exact + 1e-7
        else:
            assert value >= exact - 1e-7
