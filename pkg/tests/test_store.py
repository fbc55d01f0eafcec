import json

import pytest
from sqlalchemy import create_engine, func, select
from sqlalchemy.orm import Session

from arena.errors import ExportError
from arena.simulation.runner import run_arena
from arena.store.models import ChatRow, RunRow, StrategyRow, TradeRow, WealthRow
from arena.store.services import export_log

from conftest import make_config


@pytest.fixture(scope="module")
def two_day_log():
    return run_arena(make_config(days=2))


def count(url, model):
    engine = create_engine(url)
    try:
        with Session(engine) as s:
            return s.scalar(select(func.count()).select_from(model))
    finally:
        engine.dispose()


class TestExport:
    def test_counts_match_the_log(self, tmp_path, two_day_log):
        url = f"sqlite:///{tmp_path}/arena.db"
        counts = export_log(two_day_log, url)
        assert counts["trade"] == len(two_day_log.of_type("trade"))
        assert counts["strategy"] == len(two_day_log.of_type("strategy"))
        assert counts["wealth"] == 9 * 2
        assert counts["chat"] == len(two_day_log.of_type("chat"))
        assert count(url, TradeRow) == counts["trade"]
        assert count(url, WealthRow) == 18
        assert count(url, ChatRow) == counts["chat"]

    def test_run_row(self, tmp_path, two_day_log):
        url = f"sqlite:///{tmp_path}/arena.db"
        export_log(two_day_log, url)
        engine = create_engine(url)
        with Session(engine) as s:
            run = s.scalars(select(RunRow)).one()
            assert run.run_id == "test-run"
            assert run.days == 2 and run.seed == 7
            assert json.loads(run.config_json)["iters"] == 3
            assert {w.agent_id for w in run.wealth} == {a.name for a in make_config().agents}
        engine.dispose()

    def test_reexport_replaces(self, tmp_path, two_day_log):
        url = f"sqlite:///{tmp_path}/arena.db"
        first = export_log(two_day_log, url)
        second = export_log(two_day_log, url, replace=True)
        assert first == second
        assert count(url, RunRow) == 1
        assert count(url, WealthRow) == 18
        assert count(url, StrategyRow) == first["strategy"]

    def test_duplicate_without_replace(self, tmp_path, two_day_log):
        url = f"sqlite:///{tmp_path}/arena.db"
        export_log(two_day_log, url)
        with pytest.raises(ExportError):
            export_log(two_day_log, url, replace=False)

    def test_from_file(self, tmp_path):
        log = run_arena(make_config(days=1), out_dir=str(tmp_path / "run"))
        counts = export_log(log.path, f"sqlite:///{tmp_path}/arena.db")
        assert counts["wealth"] == 9
