from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arena.backtest.engine import build_observation
from arena.errors import StrategyError
from arena.models import AgentAccount, Holding, Op, Order, StrategyParams, TradeRecord
from arena.strategies.indicators import Direction, Signal, ema, macd, macd_signal, sma, sma_signal, zmr_signal
from arena.strategies.services import RuleAgent, Strategy, affordable_qty, rule_agent_decide, sellable_qty
from arena.strategies.tuning import default_grid, tune_params

from conftest import make_bars


def ema_oracle(xs, span):
    alpha = 2.0 / (span + 1.0)
    out = [xs[0]]
    for x in xs[1:]:
        out.append(alpha * x + (1.0 - alpha) * out[-1])
    return np.array(out)


def sma_oracle(xs, window):
    return np.array([sum(xs[i - window + 1:i + 1]) / window for i in range(window - 1, len(xs))])


class TestIndicators:
    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(1.0, 1000.0), min_size=200, max_size=200), st.integers(1, 30))
    def test_sma_and_ema_match_recurrences(self, xs, n):
        np.testing.assert_allclose(sma(xs, n), sma_oracle(xs, n), rtol=1e-10)
        np.testing.assert_allclose(ema(xs, n), ema_oracle(xs, n), rtol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(1.0, 1000.0), min_size=200, max_size=200))
    def test_macd_matches_recurrence(self, xs):
        p = StrategyParams()
        res = macd(xs, p)
        line = ema_oracle(xs, p.macd_fast) - ema_oracle(xs, p.macd_slow)
        np.testing.assert_allclose(res.macd_line, line, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(res.signal_line, ema_oracle(list(line), p.macd_signal), rtol=1e-10, atol=1e-10)

    def test_macd_of_constant_series_is_zero(self):
        res = macd([42.5] * 200)
        assert not res.macd_line.any()
        assert not res.signal_line.any()
        assert not res.histogram.any()

    def test_ema_seeds_with_first_price(self):
        assert ema([10.0, 20.0], 3)[0] == 10.0

    def test_short_series(self):
        with pytest.raises(StrategyError):
            sma([1.0, 2.0], 3)
        with pytest.raises(StrategyError):
            macd([1.0] * 10)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(1.0, 1000.0), min_size=1, max_size=20),
        st.lists(st.floats(1.0, 1000.0), min_size=30, max_size=60),
        st.integers(1, 30),
    )
    def test_sma_ignores_older_prices(self, prefix, xs, n):
        tail = sma(xs, n)
        np.testing.assert_allclose(sma(prefix + xs, n)[-len(tail):], tail, rtol=1e-10)

    def test_signal_strength_bounds(self):
        with pytest.raises(StrategyError):
            Signal(Direction.LONG_ENTRY, 1.5)
        with pytest.raises(StrategyError):
            Signal(Direction.HOLD, 0.5)


class TestSignals:
    # 20 falling closes then a steep rise: one golden cross
    PRICES = [120.0 - i for i in range(20)] + [105.0 + 4 * i for i in range(15)]
    PARAMS = StrategyParams(sma_short=3, sma_long=8)

    def brute_force_crosses(self, prices, s, l):
        def mean(t, w):
            return sum(Fraction(p) for p in prices[t - w + 1:t + 1]) / w

        days = set()
        for t in range(l, len(prices)):
            if mean(t - 1, s) <= mean(t - 1, l) and mean(t, s) > mean(t, l):
                days.add(t)
        return days

    def test_sma_golden_cross_day(self):
        expected = self.brute_force_crosses(self.PRICES, 3, 8)
        assert expected == {21}
        found = {
            t for t in range(len(self.PRICES))
            if sma_signal(self.PRICES[:t + 1], self.PARAMS).direction is Direction.LONG_ENTRY
        }
        assert found == expected

    def test_sma_death_cross(self):
        falling = [100.0 + 4 * i for i in range(15)] + [156.0 - 5 * i for i in range(15)]
        directions = [sma_signal(falling[:t + 1], self.PARAMS).direction for t in range(len(falling))]
        assert Direction.EXIT in directions

    def test_zmr_entry_and_forced_exit(self):
        prices = [100.0] * 9 + [80.0]
        p = StrategyParams(zmr_window=10, zmr_k=2.0, zmr_hold=5)
        assert zmr_signal(prices, p).direction is Direction.LONG_ENTRY
        assert zmr_signal(prices, p, position_age=5) == Signal(Direction.EXIT, 1.0)
        assert zmr_signal([100.0] * 10, p).direction is Direction.HOLD

    def test_zmr_exit_on_reversion(self):
        prices = [100.0] * 9 + [101.0]
        p = StrategyParams(zmr_window=10, zmr_k=2.0, zmr_hold=5)
        assert zmr_signal(prices, p, position_age=1).direction is Direction.EXIT

    def test_zmr_exit_while_flat(self):
        p = StrategyParams(zmr_window=10, zmr_k=2.0, zmr_hold=5)
        assert zmr_signal([100.0] * 9 + [130.0], p).direction is Direction.EXIT
        assert zmr_signal([100.0] * 9 + [101.0], p).direction is Direction.EXIT
        assert zmr_signal([100.0] * 8 + [110.0, 98.0], p).direction is Direction.HOLD

    def test_macd_signal_needs_history(self):
        assert macd_signal([100.0] * 10, StrategyParams()).direction is Direction.HOLD


class TestSizing:
    def test_affordable_qty(self):
        assert affordable_qty(1000.0, 333.33) == 3
        assert affordable_qty(0.0, 10.0) == 0
        assert affordable_qty(10.0, 0.0) == 0

    def test_sellable_qty(self):
        assert sellable_qty(10, False) == 9
        assert sellable_qty(10, True) == 10
        assert sellable_qty(0, True) == 0


def observe(closes_by_ticker, t, account, window=10):
    bars = {k: make_bars(v) for k, v in closes_by_ticker.items()}
    return build_observation(bars, t, window, account)


class TestRuleAgents:
    def test_buy_hold_splits_cash_once(self):
        acc = AgentAccount("bh", cash=90000.0)
        agent = RuleAgent("bh", Strategy.BUY_HOLD)
        closes = {"A": [100.0] * 12, "B": [50.0] * 12, "C": [30.0] * 12}
        orders = agent.decide_orders(observe(closes, 10, acc), acc)
        assert [(o.op, o.ticker, o.qty) for o in orders] == [
            (Op.BUY, "A", 300), (Op.BUY, "B", 600), (Op.BUY, "C", 1000),
        ]
        again = agent.decide_orders(observe(closes, 11, acc), acc)
        assert [o.op for o in again] == [Op.HOLD]

    def test_rule_agents_act_on_first_round_only(self):
        acc = AgentAccount("bh", cash=1000.0)
        agent = RuleAgent("bh", Strategy.BUY_HOLD)
        orders = agent.decide_orders(observe({"A": [10.0] * 12}, 10, acc), acc, iter=1)
        assert orders == [Order.hold("bh", 10, 1)]

    def test_idle_holds(self):
        acc = AgentAccount("idle", cash=1000.0)
        orders = rule_agent_decide(Strategy.IDLE, observe({"A": [10.0] * 12}, 10, acc), acc)
        assert [o.op for o in orders] == [Op.HOLD]

    def test_buy_hold_without_state_reads_the_day(self):
        acc = AgentAccount("bh", cash=100000.0)
        obs = observe({"A": [100.0] * 12}, 10, acc)
        first = rule_agent_decide(Strategy.BUY_HOLD, replace(obs, date=0), acc)
        assert [(o.op, o.qty) for o in first] == [(Op.BUY, 1000)]
        assert [o.op for o in rule_agent_decide(Strategy.BUY_HOLD, obs, acc)] == [Op.HOLD]
        held = AgentAccount("bh", cash=100.0, holdings={"A": Holding(1000, 100.0)})
        assert [o.op for o in rule_agent_decide(Strategy.BUY_HOLD, replace(obs, date=0), held)] == [Op.HOLD]

    def test_flat_zmr_exit_sells_nothing(self):
        acc = AgentAccount("z", cash=1000.0)
        obs = observe({"A": [100.0] * 11 + [130.0]}, 11, acc)
        assert [o.op for o in rule_agent_decide(Strategy.ZMR, obs, acc)] == [Op.HOLD]

    def test_sma_agent_buys_on_cross_and_tracks_entry(self):
        prices = TestSignals.PRICES
        acc = AgentAccount("sma", cash=10000.0)
        agent = RuleAgent("sma", Strategy.SMA, TestSignals.PARAMS, full_liquidation=True)
        orders = agent.decide_orders(observe({"A": prices}, 21, acc), acc)
        assert orders[0].op is Op.BUY and orders[0].price_deal == prices[21]
        agent.notify(TradeRecord(orders[0], prices[21], True, price_after=prices[21]))
        assert agent.state.entries == {"A": 21}

    def test_orders_fit_the_account(self):
        acc = AgentAccount("z", cash=500.0, holdings={"A": Holding(3, 100.0)})
        p = StrategyParams(zmr_window=10, zmr_hold=1)
        state_agent = RuleAgent("z", Strategy.ZMR, p)
        orders = state_agent.decide_orders(observe({"A": [100.0] * 9 + [80.0, 81.0]}, 10, acc), acc)
        for o in orders:
            if o.op is Op.SELL:
                assert o.qty <= acc.held("A") - 1
            if o.op is Op.BUY:
                assert o.qty * o.price_deal <= acc.cash


class TestTuning:
    def test_default_grids(self):
        sma_grid = default_grid(Strategy.SMA)
        assert len(sma_grid) == 6
        assert all(p.sma_short < p.sma_long for p in sma_grid)
        assert len(default_grid(Strategy.ZMR)) == 9
        assert default_grid(Strategy.MACD) == [StrategyParams()]

    def test_tune_picks_a_grid_point(self):
        closes = [100.0 + 10.0 * np.sin(i / 4.0) + i * 0.2 for i in range(80)]
        bars = {"A": make_bars(closes)}
        result = tune_params(bars, Strategy.SMA, window=20)
        assert result.params in default_grid(Strategy.SMA)

    def test_empty_grid(self):
        with pytest.raises(StrategyError):
            tune_params({"A": make_bars([1.0] * 30)}, Strategy.SMA, grid=[])
