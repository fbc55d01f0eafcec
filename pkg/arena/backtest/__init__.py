from arena.backtest.ablation import AblationTable, window_ablation
from arena.backtest.engine import BacktestReport, EquityCurve, TrendSummary, run_backtest
from arena.backtest.loader import OhlcvBar, load_ohlcv_csv, load_universe, slice_bars
from arena.backtest.metrics import mean_std, sharpe, summarize, total_return, win_rate

__all__ = [
    "AblationTable",
    "BacktestReport",
    "EquityCurve",
    "OhlcvBar",
    "TrendSummary",
    "load_ohlcv_csv",
    "load_universe",
    "mean_std",
    "run_backtest",
    "sharpe",
    "slice_bars",
    "summarize",
    "total_return",
    "win_rate",
    "window_ablation",
]
