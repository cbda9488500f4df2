"""Price-time-priority limit order book.

Maintains both sides as FIFO queues per integer tick price and exposes the
covariates (spread, best-quote volumes, ten-level depths, order counts) that
the intensity, placement and cancellation models consume.  All mutating
operations are single-writer; snapshots are immutable values.
"""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterator


class Side(str, Enum):
    BID = "B"
    ASK = "A"

    @property
    def opposite(self) -> "Side":
        return Side.ASK if self is Side.BID else Side.BID


class BookError(Exception):
    """Base class for order-book failures."""


class CrossingPriceError(BookError):
    """Limit price reaches or crosses the opposite best quote."""


class NoLiquidityError(BookError):
    """Market order submitted against an empty side."""


class UnknownOrderError(BookError):
    """Order id not pending in the book."""


class EmptySideError(BookError):
    """Operation requires a non-empty side."""


@dataclass(slots=True)
class Order:
    id: int
    side: Side
    price: int
    size: int
    seq: int


@dataclass(frozen=True, slots=True)
class Fill:
    order_id: int
    quantity: int


@dataclass(frozen=True, slots=True)
class MarketState:
    """Covariate snapshot.  ``spread`` is None while either side is empty."""

    spread: int | None
    best_bid: int | None
    best_ask: int | None
    q1_bid: int
    q1_ask: int
    q10_bid: int
    q10_ask: int
    n_bid: int
    n_ask: int
    total_bid: int
    total_ask: int
    depth_profile: tuple[tuple[int, ...], tuple[int, ...]] | None = None


class BookSide:
    """One side of the book: price-ordered FIFO queues, empty levels removed."""

    def __init__(self, side: Side):
        self.side = side
        self.levels: dict[int, deque[Order]] = {}
        self.level_volume: dict[int, int] = {}
        self._prices: list[int] = []  # ascending
        self.total_volume = 0
        self.order_count = 0

    def __len__(self) -> int:
        return self.order_count

    @property
    def best_price(self) -> int | None:
        if not self._prices:
            return None
        return self._prices[-1] if self.side is Side.BID else self._prices[0]

    def prices_by_priority(self) -> Iterator[int]:
        if self.side is Side.BID:
            return iter(reversed(self._prices))
        return iter(self._prices)

    def q1(self) -> int:
        best = self.best_price
        return self.level_volume[best] if best is not None else 0

    def q10(self) -> int:
        total = 0
        for i, price in enumerate(self.prices_by_priority()):
            if i >= 10:
                break
            total += self.level_volume[price]
        return total

    def depth_profile(self, depth: int) -> tuple[int, ...]:
        """Volume by tick distance from the best quote, distances 0..depth-1."""
        best = self.best_price
        out = [0] * depth
        if best is None:
            return tuple(out)
        for price in self.prices_by_priority():
            d = best - price if self.side is Side.BID else price - best
            if d >= depth:
                break
            out[d] = self.level_volume[price]
        return tuple(out)

    def orders_by_priority(self) -> Iterator[Order]:
        for price in self.prices_by_priority():
            yield from self.levels[price]

    def add(self, order: Order) -> None:
        queue = self.levels.get(order.price)
        if queue is None:
            self.levels[order.price] = deque([order])
            self.level_volume[order.price] = order.size
            bisect.insort(self._prices, order.price)
        else:
            queue.append(order)
            self.level_volume[order.price] += order.size
        self.total_volume += order.size
        self.order_count += 1

    def remove(self, order: Order) -> None:
        queue = self.levels[order.price]
        queue.remove(order)
        self.level_volume[order.price] -= order.size
        self.total_volume -= order.size
        self.order_count -= 1
        if not queue:
            del self.levels[order.price]
            del self.level_volume[order.price]
            self._prices.remove(order.price)

    def reduce(self, order: Order, quantity: int) -> None:
        if quantity >= order.size:
            self.remove(order)
        else:
            order.size -= quantity
            self.level_volume[order.price] -= quantity
            self.total_volume -= quantity


class OrderBook:
    """Dual-sided book with the operations the simulator and replay need."""

    def __init__(self) -> None:
        self.bid = BookSide(Side.BID)
        self.ask = BookSide(Side.ASK)
        self._orders: dict[int, Order] = {}
        self._next_id = 1
        self._next_seq = 1

    def side(self, side: Side) -> BookSide:
        return self.bid if side is Side.BID else self.ask

    @property
    def best_bid(self) -> int | None:
        return self.bid.best_price

    @property
    def best_ask(self) -> int | None:
        return self.ask.best_price

    @property
    def spread(self) -> int | None:
        if self.best_bid is None or self.best_ask is None:
            return None
        return self.best_ask - self.best_bid

    def order(self, order_id: int) -> Order:
        try:
            return self._orders[order_id]
        except KeyError:
            raise UnknownOrderError(f"order {order_id} not pending") from None

    def apply_limit(self, side: Side, price: int, size: int) -> int:
        """Rest a limit order; returns the new order id.

        Raises CrossingPriceError when the price reaches or crosses the
        opposite best quote (crossing prices are the caller's job to
        reject or resample).
        """
        if size < 1:
            raise BookError(f"limit size must be >= 1, got {size}")
        opp_best = self.side(side.opposite).best_price
        if opp_best is not None:
            if side is Side.BID and price >= opp_best:
                raise CrossingPriceError(
                    f"bid at {price} crosses best ask {opp_best}")
            if side is Side.ASK and price <= opp_best:
                raise CrossingPriceError(
                    f"ask at {price} crosses best bid {opp_best}")
        order = Order(self._next_id, side, price, size, self._next_seq)
        self._next_id += 1
        self._next_seq += 1
        self.side(side).add(order)
        self._orders[order.id] = order
        return order.id

    def apply_market(self, side: Side, size: int) -> tuple[list[Fill], int]:
        """Execute a market order for `side` against the opposite side.

        Consumes liquidity in price-time priority.  Returns the fills and
        the unfilled residual (0 when fully filled; a partially filled
        front order keeps its time priority).
        """
        if size < 1:
            raise BookError(f"market size must be >= 1, got {size}")
        opposite = self.side(side.opposite)
        if opposite.order_count == 0:
            raise NoLiquidityError(f"no liquidity on {side.opposite.name} side")
        fills: list[Fill] = []
        remaining = size
        while remaining > 0 and opposite.order_count > 0:
            best = opposite.best_price
            queue = opposite.levels[best]
            front = queue[0]
            take = min(front.size, remaining)
            fills.append(Fill(front.id, take))
            remaining -= take
            if take == front.size:
                opposite.remove(front)
                del self._orders[front.id]
            else:
                opposite.reduce(front, take)
        return fills, remaining

    def priority_index_of(self, order_id: int) -> float:
        """Fraction of same-side volume ahead in execution priority (0 = front)."""
        order = self.order(order_id)
        side = self.side(order.side)
        ahead = 0
        for price in side.prices_by_priority():
            if price == order.price:
                for other in side.levels[price]:
                    if other.id == order.id:
                        break
                    ahead += other.size
                break
            ahead += side.level_volume[price]
        return ahead / side.total_volume

    def find_cancel_by_index(self, side: Side, xi_bar: float) -> Order:
        """First order (priority order) whose priority index is >= xi_bar.

        Falls back to the lowest-priority order when xi_bar exceeds every
        pending index; does not mutate the book.
        """
        book_side = self.side(side)
        if book_side.order_count == 0:
            raise EmptySideError(f"no orders on {side.name} side")
        total = book_side.total_volume
        ahead = 0
        order = None
        for order in book_side.orders_by_priority():
            if ahead / total >= xi_bar:
                return order
            ahead += order.size
        return order  # fallback: last order

    def apply_cancel_by_index(self, side: Side, xi_bar: float) -> int:
        victim = self.find_cancel_by_index(side, xi_bar)
        self.cancel_order(victim.id)
        return victim.id

    def cancel_order(self, order_id: int) -> Order:
        order = self.order(order_id)
        self.side(order.side).remove(order)
        del self._orders[order_id]
        return order

    def reduce_order(self, order_id: int, quantity: int) -> None:
        """Shrink a pending order in place (replay plumbing for partial cancels)."""
        order = self.order(order_id)
        if quantity >= order.size:
            self.cancel_order(order_id)
        else:
            self.side(order.side).reduce(order, quantity)

    def level_orders(self, side: Side, price: int) -> tuple[Order, ...]:
        queue = self.side(side).levels.get(price)
        return tuple(queue) if queue else ()

    def snapshot_state(self, profile_depth: int | None = None) -> MarketState:
        profile = None
        if profile_depth is not None:
            profile = (self.bid.depth_profile(profile_depth),
                       self.ask.depth_profile(profile_depth))
        return MarketState(
            spread=self.spread,
            best_bid=self.best_bid,
            best_ask=self.best_ask,
            q1_bid=self.bid.q1(),
            q1_ask=self.ask.q1(),
            q10_bid=self.bid.q10(),
            q10_ask=self.ask.q10(),
            n_bid=self.bid.order_count,
            n_ask=self.ask.order_count,
            total_bid=self.bid.total_volume,
            total_ask=self.ask.total_volume,
            depth_profile=profile,
        )
