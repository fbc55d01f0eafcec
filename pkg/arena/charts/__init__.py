from arena.charts.render import (
    ChartSpec,
    bars_from_history,
    render_candlestick,
    render_equity_curves,
    render_holdings_bar,
    render_panels,
    render_price_line,
    render_trade_scatter,
)

__all__ = [
    "ChartSpec",
    "bars_from_history",
    "render_candlestick",
    "render_equity_curves",
    "render_holdings_bar",
    "render_panels",
    "render_price_line",
    "render_trade_scatter",
]
