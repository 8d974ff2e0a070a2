import json

import pytest

from groupin.cli import EXIT_INPUT, EXIT_OK, EXIT_USAGE, main
from groupin.config import ConfigError, build_run_config, load_toml, resolve_scheme
from groupin.store import GroupStore


@pytest.fixture
def trace(tmp_path):
    out, truth = tmp_path / "p.jsonl", tmp_path / "t.jsonl"
    assert main(["simulate", "--preset", "two-group-distance(6)", "--seed", "1", "--duration", "240",
                 "--out", str(out), "--truth", str(truth)]) == EXIT_OK
    return out, truth


class TestUsage:
    def test_help(self, capsys):
        assert main(["--help"]) == EXIT_OK
        assert "simulate" in capsys.readouterr().out

    def test_missing_input(self):
        assert main(["detect", "--out", "x"]) == EXIT_USAGE

    def test_unknown_subcommand(self):
        assert main(["explode"]) == EXIT_USAGE

    def test_bad_preset_argument(self, tmp_path):
        assert main(["simulate", "--preset", "two-group-distance(x)", "--out", str(tmp_path / "p")]) == EXIT_USAGE
        assert main(["simulate", "--preset", "mall", "--out", str(tmp_path / "p")]) == EXIT_USAGE

    def test_bad_flag_value(self, trace, tmp_path):
        assert main(["detect", "--input", str(trace[0]), "--out", str(tmp_path / "s"),
                     "--threshold", "9"]) == EXIT_USAGE


class TestEndToEnd:
    def test_simulate_detect_score(self, trace, tmp_path, capsys):
        packets, truth = trace
        store = tmp_path / "store"
        assert main(["detect", "--input", str(packets), "--out", str(store), "--sample-secs", "30"]) == EXIT_OK
        assert len(GroupStore(store)) == 2
        capsys.readouterr()
        assert main(["score", "--pred", str(store), "--truth", str(truth), "--out", str(tmp_path / "r.csv")]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["intervals"] == 2 and summary["pairwise_mean"] == 1.0
        assert (tmp_path / "r.csv").read_text().startswith("interval_index,pairwise,jaccard")

    def test_stream_matches_batch(self, trace, tmp_path):
        for name, extra in (("a", []), ("b", ["--stream"])):
            assert main(["detect", "--input", str(trace[0]), "--out", str(tmp_path / name)] + extra) == 0
        assert (tmp_path / "a" / "records.jsonl").read_bytes() == (tmp_path / "b" / "records.jsonl").read_bytes()

    def test_query_linkage_stats(self, trace, tmp_path, capsys):
        store = tmp_path / "s"
        main(["detect", "--input", str(trace[0]), "--out", str(store), "--sample-secs", "30"])
        capsys.readouterr()
        assert main(["query", "--store", str(store), "--from", "0", "--to", "100"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 1 and json.loads(lines[0])["interval_index"] == 0
        assert main(["linkage", "--store", str(store), "--min-co-present", "1", "--out", str(tmp_path / "l.csv"),
                     "--dot", str(tmp_path / "l.dot")]) == 0
        assert "p01,p02,1.000000,2,2" in (tmp_path / "l.csv").read_text()
        assert main(["stats", "--store", str(store), "--out", str(tmp_path / "s.csv"),
                     "--hist-out", str(tmp_path / "h.csv")]) == 0
        assert (tmp_path / "h.csv").read_text().splitlines() == ["group_size,count", "2,4"]

    def test_detect_rejects_non_monotone_store(self, trace, tmp_path):
        args = ["detect", "--input", str(trace[0]), "--out", str(tmp_path / "s")]
        assert main(args) == EXIT_OK
        assert main(args) == EXIT_INPUT


class TestInputErrors:
    def test_missing_file(self, tmp_path):
        assert main(["detect", "--input", str(tmp_path / "none.jsonl"), "--out", str(tmp_path / "s")]) == EXIT_INPUT

    def test_all_malformed(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("garbage\n{}\n")
        assert main(["detect", "--input", str(bad), "--out", str(tmp_path / "s")]) == EXIT_INPUT

    def test_missing_store(self, tmp_path):
        assert main(["stats", "--store", str(tmp_path / "none"), "--out", str(tmp_path / "o.csv")]) == EXIT_INPUT


class TestConfig:
    def test_file_then_flags(self, trace, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text('[run]\nscheme = "centralized"\nmatcher = "mdd"\nsample_secs = 30\nupsilon = [4, 2]\n')
        values = load_toml(cfg)
        rc = build_run_config(values, {"sample_secs": 10.0})
        assert rc.scheme == "centralized-mdd" and rc.sample_seconds == 10.0
        assert rc.upsilon.upsilon == (4.0, 2.0)
        store = tmp_path / "s"
        assert main(["detect", "--input", str(trace[0]), "--out", str(store), "--config", str(cfg),
                     "--scheme", "decentralized"]) == EXIT_OK
        assert {r.scheme for r in GroupStore(store)} == {"decentralized"}

    def test_config_errors(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("scheme = [")
        with pytest.raises(ConfigError):
            load_toml(bad)
        with pytest.raises(ConfigError):
            build_run_config({"colour": "red"}, {})
        with pytest.raises(ConfigError):
            build_run_config({"zeta": "big"}, {})
        with pytest.raises(ConfigError):
            resolve_scheme("centralized-wfm", "mdd")

    def test_bad_config_exit_code(self, trace, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("zeta = 50\n")
        assert main(["detect", "--input", str(trace[0]), "--out", str(tmp_path / "s"),
                     "--config", str(bad)]) == EXIT_USAGE
