import os

import pytest

from arena.agents.prompts import Modality
from arena.errors import ConfigError
from arena.models import OrderPolicy
from arena.runconfig import load_run_config, parse_run_config
from arena.strategies.services import Strategy

from conftest import arena_data

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")


class TestSampleConfigs:
    def test_nine_agents(self):
        cfg = load_run_config(os.path.join(CONFIGS, "nine_agents.toml"))
        assert [a.name for a in cfg.agents] == ["Amy", "Bruce", "Charles", "David", "Ella", "Frank", "Grace", "Hank", "Ivy"]
        assert cfg.tickers == ["A", "B", "C"]
        assert [s.history[-1] for s in cfg.stocks] == [445.60, 465.80, 440.60]
        by_name = {a.name: a for a in cfg.agents}
        assert by_name["Bruce"].modality is Modality.VISUAL
        assert by_name["Charles"].modality is Modality.COMBINED
        assert by_name["Ella"].reflection is False
        assert by_name["Grace"].strategy is Strategy.SMA
        assert by_name["Grace"].params.to_params().sma_long == 8
        assert by_name["Hank"].strategy is Strategy.BUY_HOLD
        assert cfg.chat.seed_gossip

    def test_backtest_data_dir_is_relative_to_the_file(self):
        cfg = load_run_config(os.path.join(CONFIGS, "backtest.toml"))
        assert cfg.mode == "backtest"
        assert cfg.backtest.data_dir == os.path.join(CONFIGS, "../data/ohlcv")
        assert cfg.backtest.test_start.isoformat() == "2024-09-03"
        assert len(cfg.backtest.tickers) == 7

    def test_ablation(self):
        cfg = load_run_config(os.path.join(CONFIGS, "ablation.toml"))
        assert cfg.backtest.windows == [5, 10, 15, 20]
        assert [m.value for m in cfg.backtest.modalities] == ["textual", "visual", "combined"]


class TestParse:
    def test_defaults(self):
        cfg = parse_run_config(arena_data())
        m = cfg.market.to_market_config()
        assert (m.daily_cap_pct, m.wealth_fee_rate, m.agent_order_policy) == (0.10, 0.001, OrderPolicy.FIXED)
        assert cfg.charts.width == 640 and cfg.charts.height == 480
        assert cfg.agents[0].capital == 100000.0

    def test_switches(self):
        cfg = parse_run_config(arena_data(fees_enabled=False, dividends_enabled=False, order_policy="seeded-shuffle"))
        m = cfg.market.to_market_config()
        assert m.wealth_fee_rate == 0.0
        assert not m.dividends_enabled
        assert m.agent_order_policy is OrderPolicy.SEEDED_SHUFFLE

    def test_run_dir(self, tmp_path):
        cfg = parse_run_config(arena_data())
        assert cfg.run_dir(str(tmp_path)) == os.path.join(str(tmp_path), "test-run")

    def test_echo_is_json_safe(self):
        import json

        echo = parse_run_config(arena_data()).echo()
        assert json.loads(json.dumps(echo))["run_id"] == "test-run"

    @pytest.mark.parametrize("mutate", [
        lambda d: d.update(days=0),
        lambda d: d.update(unknown_key=1),
        lambda d: d["market"].update(daily_cap_pct=-0.1),
        lambda d: d["market"].update(order_policy="random"),
        lambda d: d["stocks"][0].update(history=[100.0, -1.0]),
        lambda d: d["stocks"].append(dict(d["stocks"][0])),
        lambda d: d["agents"].append(dict(d["agents"][0])),
        lambda d: d["agents"][0].update(backend="rule"),
        lambda d: d["agents"][0].update(strategy="sma"),
        lambda d: d["agents"][0].update(modality="audio"),
        lambda d: d["agents"][0].update(holdings={"Z": {"qty": 1, "cost_price": 1.0}}),
        lambda d: d["agents"][0].update(holdings={"A": {"qty": -1, "cost_price": 1.0}}),
        lambda d: d["agents"][0].update(backend="rule", strategy="sma", params={"sma_short": 9, "sma_long": 4}),
        lambda d: d.update(stocks=[]),
        lambda d: d.update(backtest={"windows": []}),
        lambda d: d.update(backtest={"train_start": "2024-05-01", "train_end": "2024-01-01"}),
    ])
    def test_invalid(self, mutate):
        data = arena_data()
        mutate(data)
        with pytest.raises(ConfigError):
            parse_run_config(data)

    def test_backtest_mode_needs_no_stocks(self):
        data = arena_data()
        data.update(mode="backtest", stocks=[])
        assert parse_run_config(data).mode == "backtest"


class TestLoad:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(str(tmp_path / "nope.toml"))

    def test_bad_toml(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("run_id = [unclosed\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_run_config(str(path))
