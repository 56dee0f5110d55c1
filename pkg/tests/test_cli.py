import json

import pytest

from defitvr import __version__
from defitvr.cli import main


@pytest.fixture
def data(data_dir):
    return lambda name: str(data_dir / name)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestCompute:
    def test_wrapping_chain_text(self, capsys, data):
        code, out, _ = run(capsys, "compute", data("wrapping_chain.json"))
        assert code == 0
        assert "4,713.00" in out and "1,000.00" in out and "3,142.00" in out and "4.7130" in out

    def test_csv_and_exclusion_override(self, capsys, data):
        code, out, _ = run(capsys, "compute", data("wrapping_chain.json"), "--format", "csv", "--exclude", "Lido")
        header, row = out.strip().splitlines()
        values = dict(zip(header.split(","), row.split(",")))
        assert code == 0 and float(values["tvl_adjusted"]) == pytest.approx(2713.0)

    def test_output_file(self, capsys, data, tmp_path):
        target = tmp_path / "m.csv"
        assert run(capsys, "compute", data("wrapping_chain.json"), "--format", "csv", "-o", str(target))[0] == 0
        assert target.read_text().startswith("tvl,tvr")

    def test_missing_file_exits_one(self, capsys, tmp_path):
        code, _, err = run(capsys, "compute", str(tmp_path / "x.json"))
        assert code == 1 and "defitvr compute: error:" in err

    def test_bad_snapshot_exits_one(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"tokens": [{"id": 3}]}))
        code, _, err = run(capsys, "compute", str(path))
        assert code == 1 and "tokens[0].id" in err


class TestUsage:
    def test_missing_argument_exits_two_with_schema_hint(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["compute"])
        assert exc.value.code == 2
        assert "schema_version" in capsys.readouterr().err

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0 and __version__ in capsys.readouterr().out


class TestSimulate:
    def test_one_row_per_decline(self, capsys, data):
        code, out, _ = run(capsys, "simulate", data("synthetic_system.json"), data("scenario.json"))
        lines = out.strip().splitlines()
        assert code == 0 and len(lines) == 52
        assert lines[1].startswith("0.0,0.0,0.0,0,")

    def test_depeg_scenario(self, capsys, data):
        code, out, _ = run(capsys, "simulate", data("depeg_2x.json"), data("scenario_depeg.json"))
        rows = [ln.split(",") for ln in out.strip().splitlines()[1:]]
        first_depeg = next(float(r[0]) for r in rows if r[5])
        assert code == 0 and first_depeg == pytest.approx(0.51)

    def test_overrides(self, capsys, data, tmp_path):
        target = tmp_path / "curve.csv"
        code, _, _ = run(capsys, "simulate", data("synthetic_system.json"), data("scenario.json"),
                         "--gas-scale", "10", "--close-factor", "MakerDAO=0.5", "-o", str(target))
        assert code == 0 and len(target.read_text().splitlines()) == 52

    def test_bad_close_factor_syntax(self, capsys, data):
        code, _, err = run(capsys, "simulate", data("synthetic_system.json"), data("scenario.json"),
                           "--close-factor", "oops")
        assert code == 1 and "PROTOCOL=VALUE" in err


class TestLedger:
    def test_wrapping(self, capsys, data):
        code, out, _ = run(capsys, "ledger", data("wrapping.jsonl"), "--protocol-tvr", "Lido")
        assert code == 0
        assert "consolidated" in out and "1,571.00" in out
        assert "protocol TVR Lido: 1,000.00" in out

    def test_csv(self, capsys, data):
        code, out, _ = run(capsys, "ledger", data("leveraging.jsonl"), "--format", "csv", "--no-consolidate")
        assert code == 0 and out.startswith("holder,section,category,token,counterparty,amount")
        assert "consolidated" not in out

    def test_bad_script(self, capsys, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text('{"template": "teleport", "holder": "x"}\n')
        code, _, err = run(capsys, "ledger", str(path))
        assert code == 1 and "teleport" in err


class TestClassify:
    def test_weth(self, capsys, data):
        code, out, _ = run(capsys, "classify", data("weth.hex"))
        assert code == 0 and out.split("\t")[1] == "DerivativeNativeBacked"

    def test_patterns_and_inline_hex(self, capsys, data):
        code, out, _ = run(capsys, "classify", data("patterns.hex"), "0x6080604052600080fd")
        verdicts = [ln.split("\t")[1] for ln in out.strip().splitlines()]
        assert code == 0
        assert verdicts == ["DerivativeTokenBacked", "DerivativeNativeBacked", "Undetermined", "Undetermined"]

    def test_truncated(self, capsys):
        code, _, err = run(capsys, "classify", "0x6323b8")
        assert code == 1 and "PUSH4" in err


class TestCorrelateAndGenerate:
    def test_correlate_pairs(self, capsys, data):
        code, out, _ = run(capsys, "correlate", data("series_synthetic.csv"), "--log-returns",
                           "--pairs", "eth_usd:tvl", "eth_usd:stablecoin_supply")
        lines = out.strip().splitlines()
        assert code == 0 and len(lines) == 3 and lines[1].endswith(",***,")

    def test_generate_is_deterministic(self, capsys):
        first = run(capsys, "generate", "--seed", "5", "--vaults", "3", "--loans", "2")[1]
        second = run(capsys, "generate", "--seed", "5", "--vaults", "3", "--loans", "2")[1]
        other = run(capsys, "generate", "--seed", "6", "--vaults", "3", "--loans", "2")[1]
        assert first == second != other
        assert json.loads(first)["schema_version"] == 1

    def test_generated_snapshot_feeds_compute(self, capsys, tmp_path):
        target = tmp_path / "g.json"
        assert run(capsys, "generate", "--vaults", "4", "--loans", "4", "-o", str(target))[0] == 0
        code, out, _ = run(capsys, "compute", str(target), "--format", "csv")
        assert code == 0 and out.startswith("tvl,")
