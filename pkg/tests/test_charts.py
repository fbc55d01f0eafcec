import os

import pytest
from PIL import Image

from arena.charts.render import (
    ChartSpec,
    _scatter_points,
    bars_from_history,
    render_candlestick,
    render_equity_curves,
    render_holdings_bar,
    render_panels,
    render_price_line,
    render_trade_scatter,
)
from arena.errors import ChartDataError, ChartError
from arena.models import Op, Order, RejectReason, TradeRecord


def trade(agent, op, ticker, qty, price, date, accepted=True):
    order = Order(agent, op, ticker, qty, price, date)
    reason = None if accepted else RejectReason.INSUFFICIENT_CASH
    return TradeRecord(order, price, accepted, reason, price)


TRADES = [
    trade("Amy", Op.BUY, "A", 10, 450.0, 0),
    trade("Amy", Op.SELL, "A", 4, 455.0, 1),
    trade("Amy", Op.BUY, "B", 5, 470.0, 1, accepted=False),
    trade("Bruce", Op.BUY, "B", 2, 466.0, 1),
]

BARS = [(100.0, 104.0, 99.0, 103.0), (103.0, 103.5, 98.0, 99.0), (99.0, 101.0, 97.5, 100.5)]


class TestChartSpec:
    def test_validation(self):
        with pytest.raises(ChartError):
            ChartSpec("pie")
        with pytest.raises(ChartError):
            ChartSpec("line", width=63)


class TestRenderers:
    def test_price_line_dimensions(self, tmp_path):
        path = render_price_line([1.0, 2.0, 1.5], ChartSpec("line", 320, 200), str(tmp_path / "p.png"))
        with Image.open(path) as img:
            assert img.size == (320, 200)
            assert img.format == "PNG"

    def test_deterministic_bytes(self, tmp_path):
        spec = ChartSpec("candlestick", 300, 200, title="Stock A")
        a = render_candlestick(BARS, spec, str(tmp_path / "a.png"))
        b = render_candlestick(BARS, spec, str(tmp_path / "b.png"))
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()

    def test_bad_bar_names_its_index(self, tmp_path):
        bad = BARS[:1] + [(100.0, 99.0, 98.0, 100.0)]
        with pytest.raises(ChartDataError) as exc:
            render_candlestick(bad, ChartSpec("candlestick"), str(tmp_path / "x.png"))
        assert exc.value.index == 1
        assert not (tmp_path / "x.png").exists()

    def test_degenerate_inputs(self, tmp_path):
        with pytest.raises(ChartDataError):
            render_price_line([1.0], ChartSpec("line"), str(tmp_path / "x.png"))
        with pytest.raises(ChartDataError):
            render_price_line([1.0, float("nan")], ChartSpec("line"), str(tmp_path / "x.png"))
        with pytest.raises(ChartDataError):
            render_candlestick([], ChartSpec("candlestick"), str(tmp_path / "x.png"))
        with pytest.raises(ChartDataError):
            render_equity_curves({}, ChartSpec("equity"), str(tmp_path / "x.png"))
        # flat series still gets a readable scale
        render_price_line([5.0, 5.0], ChartSpec("line"), str(tmp_path / "flat.png"))

    def test_scatter_uses_accepted_trades_only(self, tmp_path):
        points = _scatter_points(TRADES)
        assert len(points) == 3
        assert points[0] == (0, 450.0, Op.BUY)
        path = render_trade_scatter([], ChartSpec("trade_scatter"), str(tmp_path / "empty.png"))
        assert os.path.exists(path)

    def test_holdings_and_equity(self, tmp_path):
        render_holdings_bar({"A": (10, 4), "B": (0, 0)}, ChartSpec("holdings_bar", 200, 150), str(tmp_path / "h.png"))
        render_equity_curves({"Amy": [1.0, 2.0, 3.0], "Bruce": [2.0, 1.0]}, ChartSpec("equity"), str(tmp_path / "e.png"))
        with Image.open(tmp_path / "h.png") as img:
            assert img.size == (200, 150)


class TestPanels:
    def test_panel_file_set(self, tmp_path):
        bars = {"A": BARS, "B": BARS}
        paths = render_panels(str(tmp_path), "run", 1, "Amy", bars, TRADES, window=2,
                              ticker_kinds=("line", "candlestick"), width=200, height=150)
        names = [os.path.basename(p) for p in paths]
        assert names == [
            "A_line.png", "A_candlestick.png", "B_line.png", "B_candlestick.png",
            "Amy_holdings_bar.png", "Amy_trade_scatter.png",
        ]
        assert all(os.path.dirname(p) == str(tmp_path / "run" / "1") for p in paths)

    def test_ticker_charts_are_shared(self, tmp_path):
        bars = {"A": BARS}
        first = render_panels(str(tmp_path), "run", 0, "Amy", bars, [], window=3)
        mtime = os.path.getmtime(first[0])
        second = render_panels(str(tmp_path), "run", 0, "Bruce", bars, [], window=3)
        assert first[0] == second[0]
        assert os.path.getmtime(second[0]) == mtime
        assert second[1].endswith("Bruce_holdings_bar.png")

    def test_agent_panels_are_not_ticker_kinds(self, tmp_path):
        with pytest.raises(ChartError):
            render_panels(str(tmp_path), "run", 0, "Amy", {"A": BARS}, [], 3, ticker_kinds=("holdings_bar",))

    def test_bars_from_history(self):
        out = bars_from_history([10.0, 11.0, 12.0], [(11.5, 12.5, 11.0, 12.0)], current=(12.0, 12.0, 12.0, 12.0))
        assert out[0] == (10.0, 10.0, 10.0, 10.0)
        assert len(out) == 4
