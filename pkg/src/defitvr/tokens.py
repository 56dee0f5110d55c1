"""Tokens, the plain/derivative taxonomy and endogenous derivative pricing.

A derivative token's price is derived from the value of the basket of
underlying tokens backing it, divided by its circulating supply.  CDP
stablecoins are the exception while they are sufficiently collateralised:
they trade at their peg.  Prices of nested derivatives (wstETH wraps stETH
wraps ETH) are obtained by evaluating the wrapping graph in topological order.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .exceptions import (
    CyclicWrapError,
    MissingPriceError,
    SchemaError,
    ZeroSupplyError,
)

# Category names accepted by :func:`classify_from_lists`.
PLAIN_CATEGORIES = ("native", "governance", "ncb_stablecoin")

# Native tokens known without any list; everything else must come from lists.
DEFAULT_PLAIN_LISTS = {"native": frozenset({"ETH"})}


class TokenKind(str, enum.Enum):
    PLAIN = "plain"
    DERIVATIVE = "derivative"
    CDP_STABLECOIN = "cdp_stablecoin"


@dataclass(frozen=True)
class Token:
    """A token in the wrapping network.

    ``underlying`` holds ``(token_id, quantity)`` pairs: the total quantity
    of each underlying token backing the ``supply`` units in circulation.
    Plain tokens have neither.
    """

    id: str
    kind: TokenKind
    supply: float = 0.0
    underlying: tuple[tuple[str, float], ...] = ()
    peg: float | None = None
    fluctuation: float = 0.0

    def __post_init__(self):
        kind = TokenKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(
            self, "underlying", tuple((str(u), float(q)) for u, q in self.underlying)
        )
        if not math.isfinite(self.fluctuation):
            raise SchemaError("fluctuation must be finite", f"token {self.id}")
        if kind is TokenKind.PLAIN:
            if self.underlying:
                raise SchemaError("plain token cannot have underlying tokens", f"token {self.id}")
        else:
            if not self.underlying:
                raise SchemaError(f"{kind.value} token needs an underlying basket", f"token {self.id}")
            if not self.supply > 0:
                raise SchemaError("supply must be > 0", f"token {self.id}")
            if any(q < 0 for _, q in self.underlying):
                raise SchemaError("underlying quantities must be >= 0", f"token {self.id}")
        if kind is TokenKind.CDP_STABLECOIN:
            if self.peg is None or not self.peg > 0:
                raise SchemaError("cdp_stablecoin needs peg > 0", f"token {self.id}")
        elif self.peg is not None:
            raise SchemaError("only cdp_stablecoin tokens carry a peg", f"token {self.id}")

    @property
    def is_plain(self) -> bool:
        return self.kind is TokenKind.PLAIN

    @property
    def is_stablecoin(self) -> bool:
        return self.kind is TokenKind.CDP_STABLECOIN

    def with_backing(self, supply: float, underlying: Iterable[tuple[str, float]]) -> "Token":
        """Copy with a new supply and basket (used after stablecoin burns).

        Skips validation so a fully burnt stablecoin can still be represented.
        """
        new = object.__new__(Token)
        for f in ("id", "kind", "peg", "fluctuation"):
            object.__setattr__(new, f, getattr(self, f))
        object.__setattr__(new, "supply", float(supply))
        object.__setattr__(new, "underlying", tuple(underlying))
        return new


@dataclass(frozen=True)
class PegStatus:
    """Peg state of a CDP stablecoin; ``ratio`` is Gamma / peg."""

    pegged: bool
    ratio: float

    def __str__(self):
        return "Pegged" if self.pegged else f"Depegged({self.ratio:.6g})"


def plain_flag(token: Token) -> int:
    return 1 if token.is_plain else 0


def plain_flags(tokens: Mapping[str, Token]) -> dict[str, int]:
    """tau vector: 1 for plain tokens, 0 for derivatives."""
    return {tid: plain_flag(tok) for tid, tok in tokens.items()}


def classify_from_lists(token_id: str, category_lists: Mapping[str, Iterable[str]]) -> int:
    """Return 1 if ``token_id`` is in any plain-category list, else 0.

    Lists are keyed by category name (``native``, ``governance``,
    ``ncb_stablecoin``); unrecognised keys are ignored.
    """
    for category in PLAIN_CATEGORIES:
        if token_id in set(category_lists.get(category, ())):
            return 1
    return 0


def collateral_ratio(token: Token, underlying_prices: Mapping[str, float],
                     underlying_quantities: Mapping[str, float] | None = None) -> float:
    """Basket value per unit of supply (Gamma)."""
    if token.is_plain:
        raise TypeError(f"{token.id} is a plain token and has no basket")
    if not token.supply > 0:
        raise ZeroSupplyError(f"{token.id} has zero circulating supply")
    if underlying_quantities is None:
        underlying_quantities = dict(token.underlying)
    value = 0.0
    for uid, qty in underlying_quantities.items():
        try:
            price = underlying_prices[uid]
        except KeyError:
            raise MissingPriceError(f"price of {uid} (underlying of {token.id}) is unresolved") from None
        value += price * qty
    return value / token.supply


def derivative_price(token: Token, underlying_prices: Mapping[str, float],
                     underlying_quantities: Mapping[str, float] | None = None) -> float:
    """Price of a derivative or CDP stablecoin from its basket.

    A CDP stablecoin whose basket covers its peg trades at ``peg``; every
    other case trades at the basket value per unit.  The exogenous
    fluctuation term is added in both branches.
    """
    if token.is_stablecoin and token.supply == 0:
        # fully burnt: nothing outstanding can be undercollateralised
        return token.peg + token.fluctuation
    gamma = collateral_ratio(token, underlying_prices, underlying_quantities)
    if token.is_stablecoin and gamma >= token.peg:
        return token.peg + token.fluctuation
    return gamma + token.fluctuation


def wrap_order(tokens: Mapping[str, Token]) -> list[str]:
    """Topological order of the wrapping graph, ties broken by token id."""
    indegree = {tid: 0 for tid in tokens}
    dependants: dict[str, list[str]] = {tid: [] for tid in tokens}
    for tid, tok in tokens.items():
        for uid, _ in tok.underlying:
            if uid not in tokens:
                raise MissingPriceError(f"{tid} wraps undeclared token {uid}")
            if tid not in dependants[uid]:
                dependants[uid].append(tid)
                indegree[tid] += 1
    ready = [tid for tid, n in indegree.items() if n == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        tid = heapq.heappop(ready)
        order.append(tid)
        for dep in dependants[tid]:
            indegree[dep] -= 1
            if indegree[dep] == 0:
                heapq.heappush(ready, dep)
    if len(order) != len(tokens):
        stuck = sorted(tid for tid, n in indegree.items() if n > 0)
        raise CyclicWrapError("wrapping graph has a cycle through " + ", ".join(stuck))
    return order


def resolve_prices(snapshot, plain_prices: Mapping[str, float] | None = None) -> dict[str, float]:
    """Price every token given exogenous prices for the plain ones.

    ``snapshot`` may be a :class:`~defitvr.snapshot.Snapshot` or a plain
    mapping of token id to :class:`Token`.  When ``plain_prices`` is omitted
    the snapshot's own price map is used.
    """
    tokens = getattr(snapshot, "tokens", snapshot)
    if plain_prices is None:
        plain_prices = snapshot.plain_prices
    prices: dict[str, float] = {}
    for tid in wrap_order(tokens):
        tok = tokens[tid]
        if tok.is_plain:
            try:
                price = float(plain_prices[tid])
            except KeyError:
                raise MissingPriceError(f"no exogenous price for plain token {tid}") from None
            if price < 0:
                raise SchemaError("price must be >= 0", f"prices.{tid}")
            prices[tid] = price
        else:
            prices[tid] = derivative_price(tok, prices)
    return prices


def peg_status(token: Token, resolved_prices: Mapping[str, float]) -> PegStatus:
    if not token.is_stablecoin:
        raise TypeError(f"{token.id} is not a CDP stablecoin")
    if token.supply == 0:
        return PegStatus(True, math.inf)
    gamma = collateral_ratio(token, resolved_prices)
    return PegStatus(gamma >= token.peg, max(gamma, 0.0) / token.peg)
