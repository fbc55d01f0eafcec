from __future__ import annotations

import logging
import os
import shutil
import threading
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from arena.errors import ChartDataError, ChartError
from arena.models import Op, TradeRecord

logger = logging.getLogger(__name__)

KINDS = ("line", "candlestick", "holdings_bar", "trade_scatter", "equity")
DEFAULT_TICKER_KINDS = ("line",)

BG = (255, 255, 255)
AXIS = (40, 40, 40)
GRID = (225, 225, 225)
UP = (90, 160, 90)
DOWN = (40, 40, 40)
BUY = (30, 110, 200)
SELL = (200, 60, 40)
SERIES = [(30, 110, 200), (200, 60, 40), (60, 150, 60), (140, 80, 170), (230, 150, 30), (90, 90, 90)]

# left, top, right, bottom
MARGINS = (56, 28, 16, 36)

OHLC = Tuple[float, float, float, float]


@dataclass(frozen=True)
class ChartSpec:
    kind: str
    width: int = 640
    height: int = 480
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ChartError(f"unknown chart kind: {self.kind!r}")
        if self.width < 64 or self.height < 64:
            raise ChartError(f"chart must be at least 64x64, got {self.width}x{self.height}")


# ---------------------------------------------------------------------------
# Canevas : zone de tracé, axes, échelles
# ---------------------------------------------------------------------------

class _Canvas:
    def __init__(self, spec: ChartSpec, x_range: Tuple[float, float], y_range: Tuple[float, float],
                 x_label: str = "date", y_label: str = "price"):
        self.spec = spec
        self.img = Image.new("RGB", (spec.width, spec.height), BG)
        self.draw = ImageDraw.Draw(self.img)
        self.font = ImageFont.load_default()
        left, top, right, bottom = MARGINS
        # small canvases keep a usable plot area
        scale = min(1.0, spec.width / 320, spec.height / 240)
        self.left = int(left * scale)
        self.top = int(top * scale)
        self.right = spec.width - 1 - int(right * scale)
        self.bottom = spec.height - 1 - int(bottom * scale)
        self.x0, self.x1 = _padded(*x_range)
        self.y0, self.y1 = _padded(*y_range)
        self._frame(x_label, y_label)

    def x(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.left + (v - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def y(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.bottom - (v - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)

    def _frame(self, x_label: str, y_label: str) -> None:
        d = self.draw
        for frac in (0.25, 0.5, 0.75):
            gy = self.top + frac * (self.bottom - self.top)
            d.line([(self.left, gy), (self.right, gy)], fill=GRID)
        d.rectangle([self.left, self.top, self.right, self.bottom], outline=AXIS)
        if self.spec.title:
            d.text((self.left, 2), self.spec.title, fill=AXIS, font=self.font)
        d.text((2, self.top), _fmt(self.y1), fill=AXIS, font=self.font)
        d.text((2, self.bottom - 10), _fmt(self.y0), fill=AXIS, font=self.font)
        d.text((2, (self.top + self.bottom) // 2), y_label, fill=AXIS, font=self.font)
        d.text((self.left, self.bottom + 4), _fmt(self.x0), fill=AXIS, font=self.font)
        d.text((self.right - 24, self.bottom + 4), _fmt(self.x1), fill=AXIS, font=self.font)
        d.text(((self.left + self.right) // 2 - 12, self.bottom + 4), x_label, fill=AXIS, font=self.font)

    def save(self, path: str) -> str:
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        # readers of a shared panel never see a half-written file
        tmp = f"{path}.{os.getpid()}.{threading.get_ident()}.tmp"
        self.img.save(tmp, format="PNG")
        os.replace(tmp, path)
        logger.debug("chart written kind=%s path=%s", self.spec.kind, path)
        return path


def _padded(lo: float, hi: float) -> Tuple[float, float]:
    if hi <= lo:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _fmt(v: float) -> str:
    return f"{v:.0f}" if abs(v) >= 1000 else f"{v:.2f}"


# ---------------------------------------------------------------------------
# Graphiques
# ---------------------------------------------------------------------------

def render_price_line(prices: Sequence[float], spec: ChartSpec, path: str, start: int = 0) -> str:
    values = np.asarray(prices, dtype=float)
    if values.size < 2:
        raise ChartDataError("price line needs at least 2 points")
    if not np.all(np.isfinite(values)):
        raise ChartDataError("price line contains non-finite values")
    dates = np.arange(start, start + values.size)
    c = _Canvas(spec, (dates[0], dates[-1]), (values.min(), values.max()))
    xs, ys = c.x(dates), c.y(values)
    c.draw.line(list(zip(xs.tolist(), ys.tolist())), fill=SERIES[0], width=2)
    return c.save(path)


def render_candlestick(ohlc: Sequence[OHLC], spec: ChartSpec, path: str, start: int = 0) -> str:
    """Up bars (close >= open) hollow, down bars filled."""
    if not ohlc:
        raise ChartDataError("candlestick needs at least 1 bar")
    bars = np.asarray(ohlc, dtype=float)
    for i, (o, h, l, cl) in enumerate(bars):
        if not (l <= min(o, cl) <= max(o, cl) <= h):
            raise ChartDataError(f"bar {i} violates low <= open/close <= high", index=i)

    n = len(bars)
    c = _Canvas(spec, (start - 0.5, start + n - 0.5), (bars[:, 2].min(), bars[:, 1].max()))
    centres = c.x(np.arange(start, start + n))
    half = max(1.0, (c.right - c.left) / n * 0.35)
    for i, (o, h, l, cl) in enumerate(bars):
        x = float(centres[i])
        y_hi, y_lo = float(c.y(h)), float(c.y(l))
        body_top, body_bottom = sorted((float(c.y(o)), float(c.y(cl))))
        up = cl >= o
        colour = UP if up else DOWN
        c.draw.line([(x, y_hi), (x, y_lo)], fill=colour)
        box = [x - half, body_top, x + half, body_bottom]
        if up:
            c.draw.rectangle(box, outline=colour, fill=None)
        else:
            c.draw.rectangle(box, outline=colour, fill=colour)
    return c.save(path)


def render_holdings_bar(holdings: Mapping[str, Tuple[float, float]], spec: ChartSpec, path: str) -> str:
    """Bought and sold quantity per ticker, side by side."""
    tickers = sorted(holdings)
    peak = max([max(b, s) for b, s in holdings.values()] + [1.0])
    c = _Canvas(spec, (-0.5, max(len(tickers), 1) - 0.5), (0.0, peak), x_label="ticker", y_label="shares")
    slot = (c.right - c.left) / max(len(tickers), 1)
    base = float(c.y(0.0))
    for i, t in enumerate(tickers):
        bought, sold = holdings[t]
        x = float(c.x(i))
        w = slot * 0.18
        if bought > 0:
            c.draw.rectangle([x - 2 * w, float(c.y(bought)), x, base], fill=BUY)
        if sold > 0:
            c.draw.rectangle([x, float(c.y(sold)), x + 2 * w, base], fill=SELL)
        c.draw.text((x - 4, c.bottom + 16), t, fill=AXIS, font=c.font)
    return c.save(path)


def _scatter_points(trades: Sequence[TradeRecord]) -> List[Tuple[int, float, Op]]:
    return [
        (r.order.date, r.executed_price, r.order.op)
        for r in trades
        if r.accepted and r.order.op is not Op.HOLD
    ]


def render_trade_scatter(trades: Sequence[TradeRecord], spec: ChartSpec, path: str) -> str:
    """Buys as filled up-triangles, sells as hollow down-triangles; no trades gives empty axes."""
    points = _scatter_points(trades)
    if points:
        dates = [p[0] for p in points]
        prices = [p[1] for p in points]
        c = _Canvas(spec, (min(dates), max(dates)), (min(prices), max(prices)))
    else:
        c = _Canvas(spec, (0.0, 1.0), (0.0, 1.0))
    r = 5
    for date, price, op in points:
        x, y = float(c.x(date)), float(c.y(price))
        if op is Op.BUY:
            c.draw.polygon([(x, y - r), (x - r, y + r), (x + r, y + r)], fill=BUY)
        else:
            c.draw.polygon([(x, y + r), (x - r, y - r), (x + r, y - r)], outline=SELL)
    return c.save(path)


def render_equity_curves(curves: Mapping[str, Sequence[float]], spec: ChartSpec, path: str) -> str:
    if not curves:
        raise ChartDataError("no equity curve to plot")
    names = list(curves)
    longest = max(len(curves[n]) for n in names)
    if longest < 2:
        raise ChartDataError("equity curves need at least 2 points")
    lo = min(min(curves[n]) for n in names if len(curves[n]))
    hi = max(max(curves[n]) for n in names if len(curves[n]))
    c = _Canvas(spec, (0, longest - 1), (lo, hi), y_label="wealth")
    for i, name in enumerate(names):
        values = np.asarray(curves[name], dtype=float)
        colour = SERIES[i % len(SERIES)]
        if values.size >= 2:
            xs, ys = c.x(np.arange(values.size)), c.y(values)
            c.draw.line(list(zip(xs.tolist(), ys.tolist())), fill=colour, width=2)
        c.draw.text((c.left + 6, c.top + 4 + 12 * i), name, fill=colour, font=c.font)
    return c.save(path)


# ---------------------------------------------------------------------------
# Jeu de panneaux d'un agent pour une journée
# ---------------------------------------------------------------------------

def panel_dir(root: str, run_id: str, date: int) -> str:
    return os.path.join(root, run_id, str(date))


def clear_panels(root: str, run_id: str) -> None:
    """Drop the panels of an earlier run with the same id."""
    path = os.path.join(root, run_id)
    if os.path.isdir(path):
        shutil.rmtree(path)
        logger.info("old panels removed path=%s", path)


def render_panels(
    root: str,
    run_id: str,
    date: int,
    agent_id: str,
    bars: Mapping[str, Sequence[OHLC]],
    trades: Sequence[TradeRecord],
    window: int,
    ticker_kinds: Sequence[str] = DEFAULT_TICKER_KINDS,
    width: int = 640,
    height: int = 480,
) -> List[str]:
    """Per-ticker charts over the last ``window`` bars, then the agent's two panels.

    Ticker files are shared by every agent of the day; an existing file is
    reused. Returned paths follow ticker order then ``holdings_bar`` and
    ``trade_scatter``.
    """
    out = panel_dir(root, run_id, date)
    paths: List[str] = []
    for ticker in sorted(bars):
        series = list(bars[ticker])[-window:]
        first = max(0, len(bars[ticker]) - len(series))
        for kind in ticker_kinds:
            path = os.path.join(out, f"{ticker}_{kind}.png")
            if not os.path.exists(path):
                spec = ChartSpec(kind, width, height, title=f"Stock {ticker}")
                if kind == "line":
                    closes = [b[3] for b in series]
                    if len(closes) < 2:
                        closes = [series[0][0], series[0][3]]
                    render_price_line(closes, spec, path, start=first)
                elif kind == "candlestick":
                    render_candlestick(series, spec, path, start=first)
                else:
                    raise ChartError(f"{kind} is not a per-ticker chart")
            paths.append(path)

    volumes: Dict[str, Tuple[float, float]] = {t: (0.0, 0.0) for t in bars}
    own = [r for r in trades if r.order.agent_id == agent_id]
    for r in own:
        if r.accepted and r.order.ticker in volumes and r.order.op is not Op.HOLD:
            bought, sold = volumes[r.order.ticker]
            if r.order.op is Op.BUY:
                bought += r.order.qty
            else:
                sold += r.order.qty
            volumes[r.order.ticker] = (bought, sold)
    paths.append(render_holdings_bar(
        volumes, ChartSpec("holdings_bar", width, height, title="Buy & Sell"),
        os.path.join(out, f"{agent_id}_holdings_bar.png"),
    ))
    paths.append(render_trade_scatter(
        own, ChartSpec("trade_scatter", width, height, title="Trading Record"),
        os.path.join(out, f"{agent_id}_trade_scatter.png"),
    ))
    return paths


def bars_from_history(history: Sequence[float], bars: Sequence[OHLC], current: Optional[OHLC] = None) -> List[OHLC]:
    """Daily bars for a ticker; days before the market opened are flat bars at the close."""
    out: List[OHLC] = []
    pre = len(history) - len(bars)
    for p in history[:max(pre, 0)]:
        out.append((p, p, p, p))
    out.extend(bars)
    if current is not None:
        out.append(current)
    return out
