"""The system state: tokens, protocols, stakes, positions and plain prices.

Snapshots are treated as immutable.  Every update (price shock, liquidation)
returns a new object; the dictionaries inside are never modified in place.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import (
    DanglingReferenceError,
    InconsistentStateError,
    MissingPriceError,
    SchemaError,
)
from .protocols import LiquidationOutcome, Position, Protocol, ProtocolKind, _subtract
from .tokens import Token, resolve_prices, wrap_order

# Relative slack for "sum of parts <= whole" checks on float quantities.
_TOL = 1e-9


def _leq(part: float, whole: float) -> bool:
    return part <= whole + _TOL * max(abs(whole), 1.0)


@dataclass(frozen=True)
class Snapshot:
    tokens: Mapping[str, Token] = field(default_factory=dict)
    protocols: Mapping[str, Protocol] = field(default_factory=dict)
    stakes: Mapping[tuple[str, str], float] = field(default_factory=dict)
    positions: tuple[Position, ...] = ()
    plain_prices: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "tokens", dict(self.tokens))
        object.__setattr__(self, "protocols", dict(self.protocols))
        object.__setattr__(self, "stakes", {(str(p), str(t)): float(q) for (p, t), q in self.stakes.items()})
        object.__setattr__(self, "positions", tuple(self.positions))
        object.__setattr__(self, "plain_prices", {str(k): float(v) for k, v in self.plain_prices.items()})

    # -- construction helpers ------------------------------------------------

    @classmethod
    def build(cls, tokens: Iterable[Token], protocols: Iterable[Protocol],
              stakes: Iterable[tuple[str, str, float]] = (), positions: Iterable[Position] = (),
              plain_prices: Mapping[str, float] | None = None, validate: bool = True) -> "Snapshot":
        """Assemble and (by default) validate a snapshot from record lists.

        Repeated ``(protocol, token)`` stake records are summed.
        """
        token_map: dict[str, Token] = {}
        for tok in tokens:
            if tok.id in token_map:
                raise SchemaError(f"duplicate token id {tok.id}", "tokens")
            token_map[tok.id] = tok
        proto_map: dict[str, Protocol] = {}
        for proto in protocols:
            if proto.id in proto_map:
                raise SchemaError(f"duplicate protocol id {proto.id}", "protocols")
            proto_map[proto.id] = proto
        stake_map: dict[tuple[str, str], float] = {}
        for i, (pid, tid, qty) in enumerate(stakes):
            if not qty >= 0:
                raise SchemaError("stake quantity must be >= 0", f"stakes[{i}].quantity")
            stake_map[(pid, tid)] = stake_map.get((pid, tid), 0.0) + float(qty)
        snap = cls(token_map, proto_map, stake_map, tuple(positions), dict(plain_prices or {}))
        if validate:
            snap.validate()
        return snap

    def validate(self) -> "Snapshot":
        """Check referential integrity and quantity consistency; return self."""
        for tid, tok in self.tokens.items():
            for uid, _ in tok.underlying:
                if uid not in self.tokens:
                    raise DanglingReferenceError(f"undeclared token {uid}", f"tokens.{tid}.underlying")
        wrap_order(self.tokens)
        for tid in self.plain_prices:
            if tid not in self.tokens:
                raise DanglingReferenceError(f"undeclared token {tid}", "prices")
            if not self.tokens[tid].is_plain:
                raise SchemaError(f"{tid} is not plain; its price is derived", f"prices.{tid}")
            if not self.plain_prices[tid] >= 0:
                raise SchemaError("price must be >= 0", f"prices.{tid}")
        for tid, tok in self.tokens.items():
            if tok.is_plain and tid not in self.plain_prices:
                raise MissingPriceError(f"no exogenous price for plain token {tid}")
        for (pid, tid), qty in self.stakes.items():
            if pid not in self.protocols:
                raise DanglingReferenceError(f"undeclared protocol {pid}", "stakes")
            if tid not in self.tokens:
                raise DanglingReferenceError(f"undeclared token {tid}", "stakes")
            if not qty >= 0:
                raise SchemaError("stake quantity must be >= 0", f"stakes.{pid}.{tid}")

        seen = set()
        locked = defaultdict(float)
        backing = defaultdict(float)
        issued = defaultdict(float)
        redeposited = defaultdict(float)
        for pos in self.positions:
            where = f"positions.{pos.account}@{pos.protocol}"
            if pos.key in seen:
                raise SchemaError("duplicate (account, protocol) position", where)
            seen.add(pos.key)
            proto = self.protocols.get(pos.protocol)
            if proto is None:
                raise DanglingReferenceError(f"undeclared protocol {pos.protocol}", where)
            if not proto.is_plf:
                raise SchemaError(f"{pos.protocol} is passive and cannot hold positions", where)
            for tid, q in {**pos.collateral, **pos.debt}.items():
                if tid not in self.tokens:
                    raise DanglingReferenceError(f"undeclared token {tid}", where)
            for tid, q in pos.collateral.items():
                if tid not in proto.liquidation_thresholds:
                    raise SchemaError(f"{pos.protocol} does not accept {tid} as collateral", where)
                locked[(pos.protocol, tid)] += q
            if proto.kind is ProtocolKind.CDP:
                for sid, dq in pos.debt.items():
                    stable = self.tokens[sid]
                    if not stable.is_stablecoin:
                        raise SchemaError(f"CDP debt token {sid} must be a cdp_stablecoin", where)
                    basket = dict(stable.underlying)
                    for tid in pos.collateral:
                        if tid not in basket:
                            raise SchemaError(f"collateral {tid} is not in the basket of {sid}", where)
                    issued[sid] += dq
                # collateral backs the stablecoins pro rata to the debt
                debt_total = sum(pos.debt.values())
                for sid, dq in pos.debt.items():
                    share = dq / debt_total if debt_total > 0 else 1.0 / len(pos.debt)
                    for tid, q in pos.collateral.items():
                        backing[(sid, tid)] += share * q
            for rp, rt, rq in pos.redeposits:
                if rp not in self.protocols or rt not in self.tokens:
                    raise DanglingReferenceError(f"redeposit into undeclared {rp}/{rt}", where)
                redeposited[(rp, rt)] += rq
        for key, q in locked.items():
            if not _leq(q, self.stakes.get(key, 0.0)):
                raise InconsistentStateError(
                    f"positions lock {q} {key[1]} in {key[0]} but only {self.stakes.get(key, 0.0)} is staked")
        for key, q in redeposited.items():
            if not _leq(q, self.stakes.get(key, 0.0)):
                raise InconsistentStateError(
                    f"redeposits of {q} {key[1]} in {key[0]} exceed the stake {self.stakes.get(key, 0.0)}")
        for sid, q in issued.items():
            if not _leq(q, self.tokens[sid].supply):
                raise InconsistentStateError(f"vault debt {q} exceeds the supply of {sid}")
        for (sid, tid), q in backing.items():
            if not _leq(q, dict(self.tokens[sid].underlying)[tid]):
                raise InconsistentStateError(f"vault collateral {q} {tid} exceeds the basket of {sid}")
        return self

    # -- vectors and matrices ------------------------------------------------

    @property
    def token_ids(self) -> list[str]:
        return list(self.tokens)

    @property
    def protocol_ids(self) -> list[str]:
        return list(self.protocols)

    def prices(self) -> dict[str, float]:
        return resolve_prices(self.tokens, self.plain_prices)

    def price_vector(self, prices: Mapping[str, float]) -> np.ndarray:
        try:
            return np.array([prices[t] for t in self.tokens], dtype=float)
        except KeyError as exc:
            raise MissingPriceError(f"no price for {exc.args[0]}") from None

    def plain_vector(self) -> np.ndarray:
        """tau: 1 where the token is plain."""
        return np.array([1.0 if tok.is_plain else 0.0 for tok in self.tokens.values()])

    def plf_vector(self) -> np.ndarray:
        """omega: 1 where the protocol is a CDP or lending protocol."""
        return np.array([1.0 if p.is_plf else 0.0 for p in self.protocols.values()])

    def stake_matrix(self) -> np.ndarray:
        """Q: staked quantities, tokens by protocols."""
        t_index = {t: i for i, t in enumerate(self.tokens)}
        p_index = {p: j for j, p in enumerate(self.protocols)}
        Q = np.zeros((len(t_index), len(p_index)))
        for (pid, tid), qty in self.stakes.items():
            Q[t_index[tid], p_index[pid]] += qty
        return Q

    def held_matrix(self) -> np.ndarray:
        """Q': staked quantities minus stakes funded by borrowing."""
        Q = self.stake_matrix()
        t_index = {t: i for i, t in enumerate(self.tokens)}
        p_index = {p: j for j, p in enumerate(self.protocols)}
        for pos in self.positions:
            for pid, tid, qty in pos.redeposits:
                Q[t_index[tid], p_index[pid]] -= qty
        return np.clip(Q, 0.0, None)

    # -- updates -------------------------------------------------------------

    def with_plain_prices(self, plain_prices: Mapping[str, float]) -> "Snapshot":
        return replace(self, plain_prices={**self.plain_prices, **plain_prices})

    def apply_outcomes(self, updates: Sequence[tuple[Position, LiquidationOutcome]]) -> "Snapshot":
        """Apply several liquidation outcomes at once.

        All outcomes must have been computed against this snapshot; they are
        applied in the given order but none sees the others' effects.
        """
        stakes = dict(self.stakes)
        positions = {p.key: p for p in self.positions}
        tokens = dict(self.tokens)
        for pos, out in updates:
            if not out.triggered:
                continue
            current = positions.get(pos.key)
            if current is None:
                raise InconsistentStateError(f"unknown position {pos.account}@{pos.protocol}")
            pid = current.protocol
            for tid, dq in out.repaid.items():
                if dq < 0:
                    raise InconsistentStateError(f"negative repayment of {tid}")
                stakes[(pid, tid)] = stakes.get((pid, tid), 0.0) + dq
            collateral = dict(current.collateral)
            for tid, dq in out.collateral.items():
                where = f"stake of {tid} in {pid}"
                stakes[(pid, tid)] = _subtract(stakes.get((pid, tid), 0.0), -dq, where)
                collateral[tid] = _subtract(collateral.get(tid, 0.0), -dq,
                                            f"collateral {tid} of {current.account}")
            debt = dict(current.debt)
            for tid, dq in out.debt_reduction.items():
                debt[tid] = _subtract(debt.get(tid, 0.0), dq, f"debt {tid} of {current.account}")
            if self.protocols[pid].kind is ProtocolKind.CDP:
                self._burn(tokens, out)
            positions[pos.key] = replace(current, collateral=collateral, debt=debt)
        return replace(self, stakes=stakes, positions=tuple(positions.values()), tokens=tokens)

    @staticmethod
    def _burn(tokens: dict[str, Token], out: LiquidationOutcome) -> None:
        # Burnt stablecoins leave circulation with the collateral that backed
        # them; collateral is attributed pro rata to peg-valued debt.
        weights = {sid: q * tokens[sid].peg for sid, q in out.debt_reduction.items()}
        total = sum(weights.values())
        for sid, burnt in out.debt_reduction.items():
            stable = tokens[sid]
            share = weights[sid] / total if total > 0 else 1.0 / len(weights)
            basket = dict(stable.underlying)
            for tid, dq in out.collateral.items():
                basket[tid] = _subtract(basket.get(tid, 0.0), -dq * share, f"basket {tid} of {sid}")
            supply = _subtract(stable.supply, burnt, f"supply of {sid}")
            tokens[sid] = stable.with_backing(supply, basket.items())

    def position(self, account: str, protocol: str) -> Position:
        for pos in self.positions:
            if pos.key == (account, protocol):
                return pos
        raise KeyError(f"{account}@{protocol}")
