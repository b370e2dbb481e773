import json
import math

import pytest

from steinlab.reporting import (
    TAIL_COLUMNS,
    RunManifest,
    Table,
    emit,
    read_csv,
    read_json,
    render,
    tail_table,
)


class TestTable:
    def test_empty_csv_is_header_only(self):
        assert render(Table(("a", "b")), "csv") == "a,b\n"

    def test_row_length_checked(self):
        with pytest.raises(ValueError):
            Table(("a",)).add(1, 2)

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            render(Table(("a",)), "xml")


class TestTailTable:
    def test_columns_and_std_err(self):
        table = tail_table([0.0, 1.0], [1.0, 0.25], [2.0, 0.5], 100)
        assert table.columns == TAIL_COLUMNS
        assert table.rows[0][4] == 0.0
        assert table.rows[1][4] == pytest.approx(math.sqrt(0.25 * 0.75 / 100))

    def test_exact_law_has_zero_std_err(self):
        table = tail_table([0.5], [0.3], [0.6], 0)
        assert table.rows[0][3:] == (0, 0.0)


class TestRoundTrip:
    values = (0.1, 1 / 3, math.pi * 1e-300, 2.0**-1074, 123456789.123456789)

    def test_csv(self, tmp_path):
        table = Table(("x", "k", "ok"))
        for i, v in enumerate(self.values):
            table.add(v, i, i % 2 == 0)
        path = tmp_path / "out.csv"
        emit(table, "csv", path)
        back = read_csv(path)
        assert back.columns == table.columns
        assert back.rows == table.rows

    def test_json(self, tmp_path):
        table = Table(("x",))
        for v in self.values:
            table.add(v)
        man = RunManifest("test", {"n": 3}, seed=7)
        path = tmp_path / "out.json"
        written = emit(table, "json", path, man)
        back, meta = read_json(path)
        assert back.rows == table.rows
        assert meta["seed"] == 7
        assert written[1].name == "out.json.manifest.json"

    def test_manifest_sibling(self, tmp_path):
        man = RunManifest("cw tail", {"n": 10}, seed=1, chains=2, burnin=5, thin=1)
        emit(Table(("a",)), "csv", tmp_path / "r.csv", man)
        data = json.loads((tmp_path / "r.csv.manifest.json").read_text())
        assert RunManifest.validate(data) == []
        assert data["chains"] == 2 and data["rng_algorithm"].startswith("numpy.random.Philox")


class TestManifest:
    def test_missing_fields(self):
        assert set(RunManifest.validate({"command": "x"})) == set(RunManifest.REQUIRED) - {"command"}

    def test_seed_range(self):
        with pytest.raises(ValueError):
            RunManifest("x", {}, seed=-1)
        with pytest.raises(ValueError):
            RunManifest("x", {}, seed=2**64)
