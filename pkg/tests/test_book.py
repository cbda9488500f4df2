import numpy as np
import pytest
from scipy import stats

from lobkit.book import (
    CrossingPriceError,
    EmptySideError,
    NoLiquidityError,
    OrderBook,
    Side,
    UnknownOrderError,
)


def make_book(bids=(), asks=()):
    book = OrderBook()
    for price, size in bids:
        book.apply_limit(Side.BID, price, size)
    for price, size in asks:
        book.apply_limit(Side.ASK, price, size)
    return book


class TestApplyLimit:
    def test_single_order_bookkeeping(self):
        book = OrderBook()
        book.apply_limit(Side.ASK, 10000, 5)
        state = book.snapshot_state()
        assert state.best_ask == 10000
        assert state.q1_ask == 5
        assert state.n_ask == 1

    def test_same_level_fifo(self):
        book = OrderBook()
        first = book.apply_limit(Side.ASK, 10000, 5)
        second = book.apply_limit(Side.ASK, 10000, 7)
        assert book.snapshot_state().q1_ask == 12
        queue = book.level_orders(Side.ASK, 10000)
        assert [o.id for o in queue] == [first, second]
        assert queue[0].size == 5

    def test_crossing_bid_rejected(self):
        book = make_book(asks=[(10000, 5)])
        with pytest.raises(CrossingPriceError):
            book.apply_limit(Side.BID, 10000, 3)
        with pytest.raises(CrossingPriceError):
            book.apply_limit(Side.BID, 10001, 3)

    def test_crossing_ask_rejected(self):
        book = make_book(bids=[(9998, 5)])
        with pytest.raises(CrossingPriceError):
            book.apply_limit(Side.ASK, 9998, 3)


class TestApplyMarket:
    def test_fifo_arithmetic(self):
        book = OrderBook()
        a = book.apply_limit(Side.ASK, 10000, 5)
        b = book.apply_limit(Side.ASK, 10000, 7)
        fills, residual = book.apply_market(Side.BID, 8)
        assert [(f.order_id, f.quantity) for f in fills] == [(a, 5), (b, 3)]
        assert residual == 0
        assert book.order(b).size == 4
        with pytest.raises(UnknownOrderError):
            book.order(a)

    def test_price_priority_across_levels(self):
        book = OrderBook()
        a = book.apply_limit(Side.ASK, 10000, 5)
        b = book.apply_limit(Side.ASK, 10001, 7)
        fills, residual = book.apply_market(Side.BID, 6)
        assert [(f.order_id, f.quantity) for f in fills] == [(a, 5), (b, 1)]
        assert residual == 0

    def test_exhaustion_reports_residual(self):
        book = make_book(asks=[(10000, 5), (10001, 7)])
        fills, residual = book.apply_market(Side.BID, 100)
        assert sum(f.quantity for f in fills) == 12
        assert residual == 88
        assert book.ask.order_count == 0

    def test_empty_opposite_side(self):
        book = make_book(bids=[(9999, 5)])
        with pytest.raises(NoLiquidityError):
            book.apply_market(Side.BID, 1)

    def test_volume_conservation(self):
        rng = np.random.default_rng(7)
        book = OrderBook()
        for _ in range(50):
            book.apply_limit(Side.ASK, int(rng.integers(10000, 10010)),
                             int(rng.integers(1, 10)))
        for _ in range(20):
            before = book.ask.total_volume
            size = int(rng.integers(1, 15))
            fills, residual = book.apply_market(Side.BID, size)
            removed = before - book.ask.total_volume
            assert removed == sum(f.quantity for f in fills)
            assert removed + residual == size

    def test_partial_fill_keeps_time_priority(self):
        book = OrderBook()
        a = book.apply_limit(Side.ASK, 10000, 10)
        b = book.apply_limit(Side.ASK, 10000, 5)
        book.apply_market(Side.BID, 4)
        fills, _ = book.apply_market(Side.BID, 6)
        assert fills[0].order_id == a
        assert book.order(b).size == 5


class TestPriorityIndex:
    def test_cumulative_sum_definition(self):
        book = OrderBook()
        ids = [book.apply_limit(Side.ASK, 10000 + i, size)
               for i, size in enumerate([5, 7, 8])]
        assert book.priority_index_of(ids[0]) == 0.0
        assert book.priority_index_of(ids[1]) == pytest.approx(0.25)
        assert book.priority_index_of(ids[2]) == pytest.approx(0.6)

    def test_single_order(self):
        book = OrderBook()
        oid = book.apply_limit(Side.BID, 9999, 4)
        assert book.priority_index_of(oid) == 0.0

    def test_unknown_id(self):
        book = OrderBook()
        with pytest.raises(UnknownOrderError):
            book.priority_index_of(42)

    def test_within_level_time_priority(self):
        book = OrderBook()
        first = book.apply_limit(Side.ASK, 10000, 6)
        second = book.apply_limit(Side.ASK, 10000, 4)
        assert book.priority_index_of(first) == 0.0
        assert book.priority_index_of(second) == pytest.approx(0.6)

    def test_monotone_over_priority_enumeration(self):
        rng = np.random.default_rng(3)
        book = OrderBook()
        for _ in range(40):
            book.apply_limit(Side.BID, int(rng.integers(9950, 9999)),
                             int(rng.integers(1, 12)))
        indices = [book.priority_index_of(o.id)
                   for o in book.bid.orders_by_priority()]
        assert indices[0] == 0.0
        assert all(a <= b for a, b in zip(indices, indices[1:]))


class TestCancelByIndex:
    def setup_method(self):
        self.book = OrderBook()
        self.ids = [self.book.apply_limit(Side.ASK, 10000 + i, size)
                    for i, size in enumerate([5, 7, 8])]

    def test_first_index_at_or_above_threshold(self):
        assert self.book.apply_cancel_by_index(Side.ASK, 0.3) == self.ids[2]

    def test_zero_cancels_front(self):
        assert self.book.apply_cancel_by_index(Side.ASK, 0.0) == self.ids[0]

    def test_fallback_to_last(self):
        assert self.book.apply_cancel_by_index(Side.ASK, 0.99) == self.ids[2]

    def test_empty_side(self):
        with pytest.raises(EmptySideError):
            self.book.apply_cancel_by_index(Side.BID, 0.5)

    def test_uniform_threshold_equal_volumes_victim_law(self):
        # Equal sizes, uniform thresholds: the first-index->=-threshold rule
        # puts mass 1/n on each interior rank, none on the front order
        # (reachable only at exactly 0) and 2/n on the last (fallback).
        rng = np.random.default_rng(11)
        n = 8
        draws = 100_000
        counts = np.zeros(n, dtype=int)
        for u in rng.random(draws):
            book = OrderBook()
            ids = [book.apply_limit(Side.ASK, 10000 + i, 3) for i in range(n)]
            counts[ids.index(book.apply_cancel_by_index(Side.ASK, u))] += 1
        assert counts[0] == 0
        expected = np.full(n - 1, draws / n)
        expected[-1] = 2 * draws / n
        chi2 = float(((counts[1:] - expected) ** 2 / expected).sum())
        assert chi2 < stats.chi2.ppf(0.99, df=n - 2)
        # interior ranks are each hit with frequency 1/n
        interior = counts[1:-1] / draws
        assert np.allclose(interior, 1 / n, atol=3 * np.sqrt((1 / n) * (1 - 1 / n) / draws))


class TestSnapshot:
    def test_spread_and_best_volumes(self):
        book = make_book(bids=[(9998, 3)], asks=[(10000, 5)])
        state = book.snapshot_state()
        assert state.spread == 2
        assert state.q1_bid == 3
        assert state.q1_ask == 5

    def test_q10_caps_at_ten_levels(self):
        book = OrderBook()
        for i in range(12):
            book.apply_limit(Side.ASK, 10000 + i, 2)
        state = book.snapshot_state()
        assert state.q10_ask == 20
        assert state.total_ask == 24

    def test_empty_side_sentinel(self):
        book = make_book(asks=[(10000, 5)])
        state = book.snapshot_state()
        assert state.spread is None
        assert state.q1_bid == 0
        assert state.n_bid == 0

    def test_depth_profile(self):
        book = make_book(bids=[(9999, 2), (9997, 4)], asks=[(10000, 5), (10002, 1)])
        state = book.snapshot_state(profile_depth=4)
        assert state.depth_profile == ((2, 0, 4, 0), (5, 0, 1, 0))


def test_fuzz_no_crossed_book_and_fifo():
    rng = np.random.default_rng(42)
    book = OrderBook()
    seq_filled: dict[int, list[int]] = {}
    for step in range(20_000):
        action = rng.random()
        side = Side.BID if rng.random() < 0.5 else Side.ASK
        if action < 0.55:
            ref = book.best_bid if side is Side.BID else book.best_ask
            base = ref if ref is not None else 10000
            offset = int(rng.integers(-3, 8))
            price = base - offset if side is Side.BID else base + offset
            try:
                book.apply_limit(side, price, int(rng.integers(1, 9)))
            except CrossingPriceError:
                pass
        elif action < 0.8:
            opp = book.side(side.opposite)
            if opp.order_count:
                price_before = opp.best_price
                fills, _ = book.apply_market(side, int(rng.integers(1, 12)))
                seq_filled.setdefault(price_before, []).append(fills[0].order_id)
        else:
            if book.side(side).order_count:
                book.apply_cancel_by_index(side, float(rng.random()))
        bb, ba = book.best_bid, book.best_ask
        if bb is not None and ba is not None:
            assert ba - bb >= 1, f"crossed book at step {step}"
