"""Tests for file formats and the persisted run configuration."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from data_files import (
    InputFileError,
    atomic_write_text,
    format_csv,
    format_matrix,
    format_state,
    read_matrix,
    read_moments,
    read_spectral_model,
    read_state,
    write_json,
)
from errors import InputError
from linalg import DenseSymmetricMatrix, StateVector
from moments import Basis, ScalingWindow, moments_from_spectrum
from run_config import (
    THREADS_ENV,
    RunConfig,
    build_config,
    load_config,
    save_config,
    threads_from_env,
    with_overrides,
)
from spectrum import SpectralModel


def write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


class TestMatrixFiles:
    def test_reads_comments_and_blank_lines(self, tmp_path: Path) -> None:
        path = write(tmp_path / "h.mat", "# two level\n2\n\n0 0.5\n0.5 1\n")
        matrix = read_matrix(path)
        assert matrix.entries.tolist() == [[0.0, 0.5], [0.5, 1.0]]

    def test_formatted_matrix_reads_back(self, tmp_path: Path) -> None:
        matrix = DenseSymmetricMatrix.from_rows([[0.1, 1 / 3], [1 / 3, -2.0]])
        path = write(tmp_path / "h.mat", format_matrix(matrix))
        assert read_matrix(path).entries.tolist() == matrix.entries.tolist()

    def test_short_row_reports_line(self, tmp_path: Path) -> None:
        path = write(tmp_path / "h.mat", "2\n0 1\n1\n")
        with pytest.raises(InputFileError) as excinfo:
            read_matrix(path)
        assert excinfo.value.line == 3
        assert "h.mat:3" in str(excinfo.value)

    def test_bad_number(self, tmp_path: Path) -> None:
        path = write(tmp_path / "h.mat", "1\nabc\n")
        with pytest.raises(InputFileError, match="not a number"):
            read_matrix(path)

    def test_non_finite_entry(self, tmp_path: Path) -> None:
        path = write(tmp_path / "h.mat", "1\nnan\n")
        with pytest.raises(InputFileError, match="non-finite"):
            read_matrix(path)

    def test_asymmetric_matrix(self, tmp_path: Path) -> None:
        path = write(tmp_path / "h.mat", "2\n0 1\n2 0\n")
        with pytest.raises(InputFileError, match="not symmetric"):
            read_matrix(path)

    def test_row_count_mismatch(self, tmp_path: Path) -> None:
        path = write(tmp_path / "h.mat", "3\n0 0 0\n0 0 0\n")
        with pytest.raises(InputFileError, match="expected 3 matrix rows"):
            read_matrix(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(InputFileError, match="cannot read"):
            read_matrix(tmp_path / "absent.mat")


class TestStateFiles:
    def test_reads_normalized_state(self, tmp_path: Path) -> None:
        path = write(tmp_path / "s.vec", "0.6\n0.8\n")
        assert read_state(path).amplitudes.tolist() == pytest.approx([0.6, 0.8])

    def test_unnormalized_state_rejected_unless_asked(self, tmp_path: Path) -> None:
        path = write(tmp_path / "s.vec", "3\n4\n")
        with pytest.raises(InputFileError, match="not normalized"):
            read_state(path)
        assert read_state(path, normalize=True).amplitudes.tolist() == pytest.approx([0.6, 0.8])

    def test_two_columns_rejected(self, tmp_path: Path) -> None:
        path = write(tmp_path / "s.vec", "1\n0 1\n")
        with pytest.raises(InputFileError) as excinfo:
            read_state(path)
        assert excinfo.value.line == 2

    def test_format_state(self) -> None:
        state = StateVector.from_amplitudes([0.6, 0.8])
        assert format_state(state) == "0.6\n0.8\n"


class TestJsonFiles:
    def test_spectral_model(self, tmp_path: Path, s3: SpectralModel) -> None:
        path = tmp_path / "s3.json"
        write_json(path, s3.to_json_dict())
        model = read_spectral_model(path)
        assert model.eigenvalues.tolist() == [-1.0, 0.0, 1.0]
        assert model.overlaps.tolist() == pytest.approx([0.5, 0.3, 0.2])

    def test_spectral_model_missing_field(self, tmp_path: Path) -> None:
        path = write(tmp_path / "bad.json", json.dumps({"eigenvalues": [0.0]}))
        with pytest.raises(InputFileError) as excinfo:
            read_spectral_model(path)
        assert excinfo.value.field == "overlaps"

    def test_invalid_json_reports_line(self, tmp_path: Path) -> None:
        path = write(tmp_path / "bad.json", '{\n  "eigenvalues": [0.0,\n}')
        with pytest.raises(InputFileError, match="invalid JSON") as excinfo:
            read_spectral_model(path)
        assert excinfo.value.line == 3

    def test_moments(self, tmp_path: Path, s3: SpectralModel) -> None:
        window = ScalingWindow(-1.5, 1.5)
        original = moments_from_spectrum(s3, 4, Basis.CHEBYSHEV, window)
        path = tmp_path / "m.json"
        write_json(path, original.to_json_dict())
        moments = read_moments(path)
        assert moments.basis is Basis.CHEBYSHEV
        assert moments.window == window
        assert moments.values.tolist() == original.values.tolist()

    def test_moments_window_field(self, tmp_path: Path) -> None:
        payload = {"basis": "chebyshev", "values": [1.0, 0.0], "window": {"E_L": -1.0}}
        path = write(tmp_path / "m.json", json.dumps(payload))
        with pytest.raises(InputFileError) as excinfo:
            read_moments(path)
        assert excinfo.value.field == "window.E_U"


class TestWriters:
    def test_atomic_write_leaves_no_temporary(self, tmp_path: Path) -> None:
        target = tmp_path / "out" / "table.csv"
        atomic_write_text(target, "first\n")
        atomic_write_text(target, "second\n")
        assert target.read_text(encoding="utf-8") == "second\n"
        assert sorted(path.name for path in target.parent.iterdir()) == ["table.csv"]

    def test_csv_config_line(self) -> None:
        text = format_csv(["degree", "value"], [(1, 0.3), (2, 0.5)], {"seed": 0, "basis": "m"})
        lines = text.splitlines()
        assert lines[0] == '# config={"basis":"m","seed":0}'
        assert lines[1:] == ["degree,value", "1,0.3", "2,0.5"]

    def test_csv_without_config(self) -> None:
        assert format_csv(["a"], [(0.1 + 0.2,)]) == "a\n0.30000000000000004\n"


class TestRunConfig:
    def test_defaults(self) -> None:
        config = RunConfig()
        assert config.targets == [0]
        assert config.degrees == [1, 2]
        assert config.basis is Basis.CHEBYSHEV
        assert config.max_degree == 2

    def test_weights_must_match_targets(self) -> None:
        with pytest.raises(InputError, match="weights"):
            build_config({"targets": [0, 1], "weights": [1.0]})

    def test_negative_weight(self) -> None:
        with pytest.raises(InputError, match="weights"):
            build_config({"targets": [0], "weights": [-1.0]})

    def test_degree_validation(self) -> None:
        with pytest.raises(InputError, match="degrees"):
            build_config({"degrees": []})
        with pytest.raises(InputError, match="degrees"):
            build_config({"degrees": [0, 1]})

    def test_explicit_window_required(self) -> None:
        with pytest.raises(InputError, match="explicit"):
            build_config({"window_policy": "explicit"})
        with pytest.raises(InputError, match="E_L < E_U"):
            build_config({"window_policy": "explicit", "window": [1.0, -1.0]})

    def test_threshold_needs_energy(self) -> None:
        with pytest.raises(InputError, match="threshold energy"):
            build_config({"target_mode": "threshold"})

    def test_overrides_skip_unset_values(self) -> None:
        base = build_config({"degrees": [1, 2, 3], "seed": 4})
        merged = with_overrides(base, {"degrees": [5], "seed": None})
        assert merged.degrees == [5]
        assert merged.seed == 4

    def test_save_and_load(self, tmp_path: Path) -> None:
        config = build_config({"targets": [0, 2], "weights": [1.0, 0.5], "basis": "monomial"})
        path = tmp_path / "run.json"
        save_config(config, path)
        assert load_config(path) == config

    def test_load_reports_invalid_file(self, tmp_path: Path) -> None:
        path = write(tmp_path / "run.json", json.dumps({"threads": 0}))
        with pytest.raises(InputFileError, match="threads"):
            load_config(path)
        with pytest.raises(InputFileError, match="JSON object"):
            load_config(write(tmp_path / "list.json", "[]"))

    def test_threads_from_env(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert threads_from_env(2) == 2
        monkeypatch.setenv(THREADS_ENV, "4")
        assert threads_from_env() == 4
        monkeypatch.setenv(THREADS_ENV, "many")
        with pytest.raises(InputError):
            threads_from_env()
        monkeypatch.setenv(THREADS_ENV, "0")
        with pytest.raises(InputError):
            threads_from_env()
