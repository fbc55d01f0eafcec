import json

import pytest

from arena import __version__
from arena.cli import _mask_url, main

from conftest import STOCKS

AGENTS = [("Amy", "AI Researcher"), ("Bruce", "Lawyer"), ("Ella", "Teacher")]


def write_config(tmp_path, days=2):
    lines = [
        'run_id = "cli-run"',
        "seed = 1",
        f"days = {days}",
        "iters = 2",
        "window = 10",
        "",
        "[llm]",
        "workers = 2",
    ]
    for s in STOCKS:
        lines += [
            "",
            "[[stocks]]",
            f'ticker = "{s["ticker"]}"',
            f'dps = {s["dps"]}',
            f'qty_total = {s["qty_total"]}',
            "history = [" + ", ".join(str(x) for x in s["history"]) + "]",
        ]
    for name, profession in AGENTS:
        lines += ["", "[[agents]]", f'name = "{name}"', 'backend = "stub"', f'profession = "{profession}"']
    lines += ["", "[[agents]]", 'name = "Hank"', 'backend = "rule"', 'strategy = "buy_hold"']
    path = tmp_path / "run.toml"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture
def run_log(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "runs"
    assert main(["arena", "run", "--config", cfg, "--out", str(out)]) == 0
    return out / "cli-run" / "events.jsonl"


class TestUsage:
    def test_no_command(self):
        assert main([]) == 1

    def test_unknown_flag(self):
        assert main(["replay", "--log", "x", "--frobnicate"]) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["arena", "run", "--config", str(tmp_path / "none.toml")]) == 1

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert __version__ in capsys.readouterr().out


class TestCommands:
    def test_arena_run_prints_the_table(self, run_log, capsys):
        assert run_log.exists()
        out = capsys.readouterr().out
        assert "event log:" in out
        assert "Hank" in out

    def test_replay(self, run_log, capsys):
        capsys.readouterr()
        assert main(["replay", "--log", str(run_log)]) == 0
        out = capsys.readouterr().out
        assert out.startswith("replayed day=2")
        assert "Amy" in out

    def test_corrupt_log_is_a_runtime_error(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("not a log\n", encoding="utf-8")
        assert main(["replay", "--log", str(path)]) == 2
        assert main(["report", "--log", str(tmp_path / "missing.jsonl")]) == 2

    def test_report_outputs(self, run_log, tmp_path):
        js = tmp_path / "report.json"
        xlsx = tmp_path / "report.xlsx"
        plots = tmp_path / "plots"
        rc = main(["report", "--log", str(run_log), "--json", str(js), "--xlsx", str(xlsx),
                   "--plots", str(plots), "--baseline", "Hank"])
        assert rc == 0
        data = json.loads(js.read_text(encoding="utf-8"))
        assert [a["agent_id"] for a in data["agents"]] == ["Amy", "Bruce", "Ella", "Hank"]
        assert xlsx.exists()
        assert (plots / "equity.png").exists()

    def test_unknown_baseline_is_a_usage_error(self, run_log):
        assert main(["report", "--log", str(run_log), "--baseline", "Nobody"]) == 1

    def test_export(self, run_log, tmp_path, capsys):
        url = f"sqlite:///{tmp_path}/arena.db"
        assert main(["export", "--log", str(run_log), "--db", url]) == 0
        out = capsys.readouterr().out
        assert "wealth=8" in out


class TestMaskUrl:
    @pytest.mark.parametrize("url, expected", [
        ("postgresql+psycopg://arena:secret@db:5432/arena", "postgresql+psycopg://arena:***@db:5432/arena"),
        ("sqlite:///tmp/arena.db", "sqlite:///tmp/arena.db"),
        ("postgresql://arena@db/arena", "postgresql://arena@db/arena"),
    ])
    def test_mask(self, url, expected):
        assert _mask_url(url) == expected
