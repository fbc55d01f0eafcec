import datetime
import hashlib
import math
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arena.backtest.ablation import window_ablation
from arena.backtest.engine import run_backtest
from arena.backtest.loader import load_ohlcv_csv, load_universe, slice_bars
from arena.backtest.metrics import daily_returns, format_sr, mean_std, sharpe, summarize, total_return, win_rate
from arena.backtest.services import render_backtests, run_ablation, run_backtests
from arena.errors import BacktestError, ConfigError, DataError
from arena.runconfig import parse_run_config
from arena.strategies.services import RuleAgent, Strategy

from conftest import make_bars

HEADER = "date,open,high,low,close,volume\n"


def write_csv(path, closes, start=datetime.date(2024, 1, 2)):
    rows = []
    for bar in make_bars(closes, start):
        rows.append(f"{bar.date.isoformat()},{bar.open},{bar.high},{bar.low},{bar.close},{bar.volume}")
    path.write_text(HEADER + "\n".join(rows) + "\n", encoding="utf-8")


def wave(n, base=100.0, step=0.7, amp=6.0):
    return [round(base + step * i + amp * math.sin(i / 3.0), 2) for i in range(n)]


class TestMetrics:
    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(50.0, 200.0), min_size=3, max_size=60))
    def test_against_brute_force(self, wealth):
        m = summarize(wealth)
        returns = [wealth[i] / wealth[i - 1] - 1.0 for i in range(1, len(wealth))]
        assert m.tr_pct == pytest.approx((wealth[-1] - wealth[0]) / wealth[0] * 100.0, rel=1e-9, abs=1e-9)
        assert m.wr_pct == pytest.approx(sum(r > 0 for r in returns) / len(returns) * 100.0)
        assert m.mean_pct == pytest.approx(statistics.fmean(returns) * 100.0, rel=1e-9, abs=1e-12)
        if len(set(returns)) > 1:
            sd = statistics.stdev(returns)
            assert m.std_pct == pytest.approx(sd * 100.0, rel=1e-9, abs=1e-12)
            if sd > 1e-6:
                assert m.sr == pytest.approx(statistics.fmean(returns) / sd, rel=1e-7, abs=1e-9)

    def test_sharpe_undefined_on_flat_returns(self):
        assert math.isnan(sharpe([0.01, 0.01, 0.01]))
        m = summarize([100.0, 100.0, 100.0, 100.0])
        assert not m.sr_defined
        assert m.to_dict()["sr"] == "undefined"
        assert format_sr(m.sr) == "undefined"
        assert m.wr_pct == 0.0

    def test_two_point_curve(self):
        m = summarize([100.0, 110.0])
        assert m.tr_pct == pytest.approx(10.0)
        assert not m.sr_defined

    def test_domain_errors(self):
        with pytest.raises(BacktestError):
            summarize([100.0])
        with pytest.raises(BacktestError):
            total_return(0.0, 5.0)
        with pytest.raises(BacktestError):
            win_rate([])
        with pytest.raises(BacktestError):
            mean_std([0.1])
        with pytest.raises(BacktestError):
            daily_returns([100.0, 0.0, 50.0])


class TestRunBacktest:
    def test_buy_hold_closed_form(self):
        capital = 100000.0
        closes = {"A": wave(40), "B": wave(40, base=35.0, step=-0.2, amp=2.0)}
        bars = {t: make_bars(c) for t, c in closes.items()}
        agent = RuleAgent("bh", Strategy.BUY_HOLD, full_liquidation=True)
        report = run_backtest(bars, agent, window=10, capital=capital)

        t0 = 10
        qty = {t: math.floor((capital / 2) / c[t0]) for t, c in closes.items()}
        cash = capital - sum(qty[t] * closes[t][t0] for t in closes)
        final = cash + sum(qty[t] * closes[t][-1] for t in closes)

        assert report.curve.wealth[0] == capital
        assert len(report.curve.wealth) == 40 - t0 + 1
        assert report.curve.wealth[-1] == pytest.approx(final, rel=1e-9)
        assert [r.order.qty for r in report.trades] == [qty["A"], qty["B"]]
        assert report.trend.per_ticker["A"] == pytest.approx(
            (closes["A"][-1] - closes["A"][t0 - 1]) / closes["A"][t0 - 1] * 100.0
        )
        assert report.delta_pct == pytest.approx(report.tr_pct - report.trend.avg)

    def test_idle_agent_earns_nothing(self):
        bars = {"A": make_bars(wave(30))}
        report = run_backtest(bars, RuleAgent("idle", Strategy.IDLE), window=5)
        assert report.tr_pct == 0.0
        assert not report.metrics.sr_defined
        assert report.trades == []

    def test_agent_failure_holds(self):
        class Broken(RuleAgent):
            def decide_orders(self, obs, account, iter=0):
                raise RuntimeError("boom")

        report = run_backtest({"A": make_bars(wave(20))}, Broken("x", Strategy.IDLE), window=5)
        assert report.tr_pct == 0.0

    def test_not_enough_bars(self):
        with pytest.raises(BacktestError):
            run_backtest({"A": make_bars(wave(10))}, RuleAgent("i", Strategy.IDLE), window=10)
        with pytest.raises(BacktestError):
            run_backtest({"A": make_bars(wave(30))}, RuleAgent("i", Strategy.IDLE), window=10, start=5)

    def test_dates_missing_from_one_ticker_are_dropped(self):
        a = make_bars(wave(30))
        b = make_bars(wave(30, base=50.0))
        del b[15]
        report = run_backtest({"A": a, "B": b}, RuleAgent("i", Strategy.IDLE), window=5)
        assert len(report.curve.wealth) == 29 - 5 + 1


class TestAblation:
    def test_table_shape_and_shared_evaluation_days(self):
        bars = {"A": make_bars(wave(60)), "B": make_bars(wave(60, base=80.0, step=0.3))}
        modalities = ("textual", "visual", "combined")
        table = window_ablation(
            bars, lambda m, w: RuleAgent(f"bh-{m}-{w}", Strategy.BUY_HOLD, full_liquidation=True),
            windows=(5, 10, 15, 20), modalities=modalities, workers=2,
        )
        assert [(r.modality, r.window) for r in table.rows] == [
            (m, w) for m in modalities for w in (5, 10, 15, 20)
        ]
        # buy-and-hold ignores the window, so every cell sees the same days
        assert len({round(r.report.tr_pct, 9) for r in table.rows}) == 1
        assert {len(r.report.curve.wealth) for r in table.rows} == {60 - 20 + 1}
        text = table.render()
        assert text.splitlines()[0].split() == ["Modality", "Window", "TR", "Mean", "Std", "WR", "SR"]
        assert len(table.to_dict()) == 12

    def test_empty_windows(self):
        with pytest.raises(BacktestError):
            window_ablation({"A": make_bars(wave(30))}, lambda m, w: None, windows=())


class TestLoader:
    def test_reads_and_sorts(self, tmp_path, caplog):
        path = tmp_path / "A.csv"
        path.write_text(
            HEADER
            + "2024-01-03,10,11,9,10.5,100\n"
            + "2024-01-02,10,10.5,9.5,10,200\n",
            encoding="utf-8",
        )
        bars = load_ohlcv_csv(str(path), "A")
        assert [b.date for b in bars] == [datetime.date(2024, 1, 2), datetime.date(2024, 1, 3)]
        assert bars[1].close == 10.5
        assert "unsorted" in caplog.text

    def test_malformed_row_reports_its_line(self, tmp_path):
        path = tmp_path / "A.csv"
        path.write_text(HEADER + "2024-01-02,10,11,9,10,1\n2024-01-03,abc,11,9,10,1\n", encoding="utf-8")
        with pytest.raises(DataError) as exc:
            load_ohlcv_csv(str(path), "A")
        assert exc.value.line == 3

    def test_inconsistent_bar(self, tmp_path):
        path = tmp_path / "A.csv"
        path.write_text(HEADER + "2024-01-02,10,9.5,9,10,1\n", encoding="utf-8")
        with pytest.raises(DataError) as exc:
            load_ohlcv_csv(str(path), "A")
        assert exc.value.line == 2

    def test_duplicate_date(self, tmp_path):
        path = tmp_path / "A.csv"
        path.write_text(HEADER + "2024-01-02,10,11,9,10,1\n2024-01-02,10,11,9,10,1\n", encoding="utf-8")
        with pytest.raises(DataError) as exc:
            load_ohlcv_csv(str(path), "A")
        assert exc.value.line == 3

    def test_column_mapping_and_missing_columns(self, tmp_path):
        path = tmp_path / "A.csv"
        path.write_text("Day,O,H,L,Adj Close,Vol\n2024-01-02,10,11,9,10,1\n", encoding="utf-8")
        with pytest.raises(DataError):
            load_ohlcv_csv(str(path), "A")
        bars = load_ohlcv_csv(
            str(path), "A",
            columns={"date": "Day", "open": "O", "high": "H", "low": "L", "close": "Adj Close", "volume": "Vol"},
        )
        assert bars[0].close == 10.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_universe(str(tmp_path), ["NOPE"])

    def test_slice_is_inclusive(self):
        bars = {"A": make_bars(wave(10))}
        out = slice_bars(bars, datetime.date(2024, 1, 4), datetime.date(2024, 1, 6))
        assert [b.date.day for b in out["A"]] == [4, 5, 6]


def backtest_config(root, **extra):
    data = {
        "run_id": "bt",
        "mode": "backtest",
        "output_dir": str(root / "runs"),
        "agents": [
            {"name": "BuyHold", "backend": "rule", "strategy": "buy_hold"},
            {"name": "SMA", "backend": "rule", "strategy": "sma", "params": {"sma_short": 5, "sma_long": 10}},
            {"name": "Idle", "backend": "rule", "strategy": "idle"},
        ],
        "backtest": {
            "data_dir": str(root),
            "tickers": ["A", "B"],
            "window": 10,
            "train_start": "2024-01-02",
            "train_end": "2024-02-20",
            "test_start": "2024-02-21",
            "test_end": "2024-04-10",
            "tune": True,
            **extra,
        },
    }
    return parse_run_config(data)


class TestServices:
    @pytest.fixture
    def data_dir(self, tmp_path):
        write_csv(tmp_path / "A.csv", wave(100))
        write_csv(tmp_path / "B.csv", wave(100, base=60.0, step=-0.1, amp=4.0))
        return tmp_path

    @staticmethod
    def llm_config(data_dir, **backtest):
        return parse_run_config({
            "run_id": "bt-llm",
            "mode": "backtest",
            "output_dir": str(data_dir / "runs"),
            "agents": [{"name": "Reflective", "backend": "stub"}],
            "backtest": {"data_dir": str(data_dir), "tickers": ["A"], "window": 5,
                         "test_start": "2024-03-01", "test_end": "2024-03-15", **backtest},
        })

    def test_run_backtests_tunes_rule_agents(self, data_dir):
        cfg = backtest_config(data_dir)
        reports = run_backtests(cfg, gateways={})
        assert [r.agent_id for r in reports] == ["BuyHold", "SMA", "Idle"]
        assert "tuned_params" in reports[1].config
        assert "tuned_params" not in reports[0].config
        assert reports[2].tr_pct == 0.0
        table = render_backtests(reports)
        assert table.splitlines()[0].split()[0] == "Agent"
        assert "undefined" in table.splitlines()[3]

    def test_evaluation_covers_the_whole_test_period(self, data_dir):
        reports = run_backtests(backtest_config(data_dir), gateways={})
        curve = reports[0].curve
        # the bar before test_start carries the starting capital
        assert curve.dates[:2] == ["2024-02-20", "2024-02-21"]
        assert curve.dates[-1] == "2024-04-10"
        assert len(curve.wealth) == 50 + 1

    def test_too_little_history_before_the_test_period(self, data_dir):
        cfg = backtest_config(data_dir, test_start="2024-01-05", train_start=None, train_end=None, tune=False)
        with pytest.raises(BacktestError):
            run_backtests(cfg, gateways={})

    def test_run_ablation_for_rule_agent(self, data_dir):
        cfg = backtest_config(data_dir)
        table = run_ablation(cfg, gateways={}, agent_name="SMA", windows=[5, 10])
        assert [(r.modality, r.window) for r in table.rows] == [("textual", 5), ("textual", 10)]
        assert all(r.report.curve.dates[1] == "2024-02-21" for r in table.rows)

    def test_stub_llm_agent_sees_closes_before_the_test_period(self, data_dir):
        from conftest import scripted_gateway
        from arena.llm.stub import ArenaStubResponder

        cfg = self.llm_config(data_dir)
        gw = scripted_gateway(responder=ArenaStubResponder(seed=3))
        reports = run_backtests(cfg, gateways={"stub": gw})
        assert len(reports[0].curve.wealth) == 15 + 1
        assert reports[0].curve.wealth[0] == cfg.backtest.capital
        assert reports[0].curve.dates[0] == "2024-02-29"

        first = next(r for r in gw.backend.calls if r.purpose == "analysis")
        closes = ", ".join(f"{c:.2f}" for c in wave(100)[55:60])
        assert f"The closing prices in the past 5 days are: [{closes}]" in first.text

    def test_visual_ablation_charts_follow_the_window(self, data_dir):
        from conftest import scripted_gateway
        from arena.llm.stub import ArenaStubResponder

        cfg = self.llm_config(data_dir, test_end="2024-03-03", modalities=["visual"])
        gw = scripted_gateway(responder=ArenaStubResponder(seed=3))
        table = run_ablation(cfg, gateways={"stub": gw}, windows=[5, 10])
        assert [(r.modality, r.window) for r in table.rows] == [("visual", 5), ("visual", 10)]

        root = data_dir / "runs" / "bt-llm" / "charts"
        w5 = sorted((root / "bt-llm-Reflective-visual-w5").glob("*/A_line.png"))
        w10 = sorted((root / "bt-llm-Reflective-visual-w10").glob("*/A_line.png"))
        assert len(w5) == len(w10) == 3
        for a, b in zip(w5, w10):
            assert a.parent.name == b.parent.name
            assert hashlib.sha256(a.read_bytes()).digest() != hashlib.sha256(b.read_bytes()).digest()

    def test_unknown_agent_and_missing_data(self, data_dir):
        cfg = backtest_config(data_dir)
        with pytest.raises(ConfigError):
            run_ablation(cfg, gateways={}, agent_name="Nobody")
        cfg = backtest_config(data_dir, data_dir=str(data_dir / "missing"))
        with pytest.raises(DataError):
            run_backtests(cfg, gateways={})
