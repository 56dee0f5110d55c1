"""Protocols, PLF positions, health factors and liquidation rules.

Two kinds of protocol for loanable funds (PLF) are modelled:

* ``cdp`` -- a vault mints a stablecoin against collateral.  A liquidator
  repays the vault debt (the stablecoin is burnt) and takes the collateral.
* ``lending`` -- a liquidator repays up to ``close_factor`` of the debt and
  receives collateral worth ``1 + liquidation_bonus`` times what was repaid.

Everything else is ``passive`` (DEXes, liquid staking, yield aggregators).

The CDP close factor scales the seized fraction of the vault; with the
default ``close_factor=1`` a CDP liquidation seizes everything.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

from .exceptions import InconsistentStateError, MissingPriceError, SchemaError


class ProtocolKind(str, enum.Enum):
    CDP = "cdp"
    LENDING = "lending"
    PASSIVE = "passive"


@dataclass(frozen=True)
class Protocol:
    id: str
    kind: ProtocolKind = ProtocolKind.PASSIVE
    close_factor: float | None = None
    liquidation_bonus: float | None = None
    liquidation_thresholds: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        kind = ProtocolKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "liquidation_thresholds", dict(self.liquidation_thresholds))
        where = f"protocol {self.id}"
        if kind is ProtocolKind.PASSIVE:
            if (self.close_factor is not None or self.liquidation_bonus is not None
                    or self.liquidation_thresholds):
                raise SchemaError("passive protocols carry no close factor, bonus or thresholds", where)
            return
        if self.close_factor is None:
            object.__setattr__(self, "close_factor", 1.0 if kind is ProtocolKind.CDP else 0.5)
        if not 0 < self.close_factor <= 1:
            raise SchemaError("close_factor must be in (0, 1]", where)
        if kind is ProtocolKind.LENDING:
            if self.liquidation_bonus is None:
                raise SchemaError("lending protocols need liquidation_bonus", where)
            if self.liquidation_bonus < 0:
                raise SchemaError("liquidation_bonus must be >= 0", where)
        elif self.liquidation_bonus is not None:
            raise SchemaError("liquidation_bonus applies to lending protocols only", where)
        for tid, alpha in self.liquidation_thresholds.items():
            if not 0 <= alpha < 1:
                raise SchemaError("liquidation threshold must be in [0, 1)", f"{where} threshold {tid}")

    @property
    def is_plf(self) -> bool:
        return self.kind is not ProtocolKind.PASSIVE


@dataclass(frozen=True)
class Position:
    """One account's collateral and debt inside a PLF.

    ``redeposits`` lists ``(protocol, token, quantity)`` stakes elsewhere in
    the system that were funded by this position's borrowing.  They are
    excluded from the held-token matrix used for TVR.
    """

    account: str
    protocol: str
    collateral: Mapping[str, float] = field(default_factory=dict)
    debt: Mapping[str, float] = field(default_factory=dict)
    redeposits: tuple[tuple[str, str, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "collateral", {str(k): float(v) for k, v in dict(self.collateral).items()})
        object.__setattr__(self, "debt", {str(k): float(v) for k, v in dict(self.debt).items()})
        object.__setattr__(self, "redeposits",
                           tuple((str(p), str(t), float(q)) for p, t, q in self.redeposits))
        where = f"position {self.account}@{self.protocol}"
        for name, vec in (("collateral", self.collateral), ("debt", self.debt)):
            for tid, q in vec.items():
                if not (q >= 0 and math.isfinite(q)):
                    raise SchemaError(f"{name} quantity must be finite and >= 0", f"{where} {name}.{tid}")
        for _, tid, q in self.redeposits:
            if not q >= 0:
                raise SchemaError("redeposit quantity must be >= 0", f"{where} redeposits.{tid}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.account, self.protocol)


@dataclass(frozen=True)
class LiquidationOutcome:
    """Result of evaluating one position against the liquidation guard.

    ``repaid`` and ``collateral`` are the stake-matrix deltas for the
    protocol's column.  ``debt_reduction`` is how much of each debt token the
    position no longer owes; for a CDP this is the burnt stablecoin.
    """

    triggered: bool
    profit: float
    health: float
    repaid: Mapping[str, float] = field(default_factory=dict)
    collateral: Mapping[str, float] = field(default_factory=dict)
    debt_reduction: Mapping[str, float] = field(default_factory=dict)
    repaid_usd: float = 0.0
    seized_usd: float = 0.0

    @property
    def deltas(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for vec in (self.repaid, self.collateral):
            for tid, q in vec.items():
                out[tid] = out.get(tid, 0.0) + q
        return out


def _value(vector: Mapping[str, float], prices: Mapping[str, float]) -> float:
    total = 0.0
    for tid, q in vector.items():
        try:
            total += q * prices[tid]
        except KeyError:
            raise MissingPriceError(f"no price for {tid}") from None
    return total


def collateral_value(position: Position, prices: Mapping[str, float]) -> float:
    return _value(position.collateral, prices)


def debt_value(position: Position, prices: Mapping[str, float]) -> float:
    return _value(position.debt, prices)


def health_factor(position: Position, prices: Mapping[str, float],
                  thresholds: Mapping[str, float]) -> float:
    """Threshold-weighted collateral value over debt value.

    A position without debt value is never liquidable; ``inf`` is returned.
    """
    vd = debt_value(position, prices)
    if vd <= 0:
        return math.inf
    weighted = 0.0
    for tid, q in position.collateral.items():
        try:
            alpha = thresholds[tid]
        except KeyError:
            raise SchemaError(f"no liquidation threshold for collateral {tid}",
                              f"protocol {position.protocol}") from None
        weighted += q * alpha * prices[tid]
    return weighted / vd


def max_repayable(position: Position, prices: Mapping[str, float],
                  close_factor: float, bonus: float) -> float:
    vc = collateral_value(position, prices)
    vd = debt_value(position, prices)
    return min(vc / (1 + bonus), close_factor * vd)


def liquidation_profit(position: Position, prices: Mapping[str, float],
                       protocol: Protocol, gas_fees: float) -> float:
    """Liquidator profit net of gas.

    CDP: ``close_factor * (V_c - V_d) - gas``.  Lending: ``V_liq * b - gas``.
    """
    if protocol.kind is ProtocolKind.CDP:
        vc = collateral_value(position, prices)
        vd = debt_value(position, prices)
        return protocol.close_factor * (vc - vd) - gas_fees
    if protocol.kind is ProtocolKind.LENDING:
        v_liq = max_repayable(position, prices, protocol.close_factor, protocol.liquidation_bonus)
        return v_liq * protocol.liquidation_bonus - gas_fees
    raise TypeError(f"protocol {protocol.id} is passive; nothing to liquidate")


def liquidation_deltas(position: Position, prices: Mapping[str, float],
                       protocol: Protocol) -> LiquidationOutcome:
    """Quantity changes of a liquidation, assuming the guard already passed.

    The returned outcome has ``triggered=True`` and ``profit``/``health`` left
    as NaN; :func:`evaluate_liquidation` fills them in.
    """
    vc = collateral_value(position, prices)
    vd = debt_value(position, prices)
    if protocol.kind is ProtocolKind.CDP:
        share = protocol.close_factor
        repaid = {tid: 0.0 for tid in position.debt}
        collateral = {tid: -share * q for tid, q in position.collateral.items()}
        reduction = {tid: share * q for tid, q in position.debt.items()}
        return LiquidationOutcome(True, math.nan, math.nan, repaid, collateral, reduction,
                                  repaid_usd=share * vd, seized_usd=share * vc)
    if protocol.kind is ProtocolKind.LENDING:
        b = protocol.liquidation_bonus
        v_liq = min(vc / (1 + b), protocol.close_factor * vd)
        repaid = {tid: v_liq * q / vd for tid, q in position.debt.items()}
        collateral = {tid: -(1 + b) * v_liq * q / vc for tid, q in position.collateral.items()}
        return LiquidationOutcome(True, math.nan, math.nan, repaid, collateral, dict(repaid),
                                  repaid_usd=v_liq, seized_usd=(1 + b) * v_liq)
    raise TypeError(f"protocol {protocol.id} is passive; nothing to liquidate")


def evaluate_liquidation(position: Position, prices: Mapping[str, float],
                         protocol: Protocol, gas_fees: float) -> LiquidationOutcome:
    """Apply the liquidation guard ``h < 1 and profit > 0``."""
    h = health_factor(position, prices, protocol.liquidation_thresholds)
    if not h < 1:
        return LiquidationOutcome(False, math.nan, h)
    profit = liquidation_profit(position, prices, protocol, gas_fees)
    if not profit > 0:
        return LiquidationOutcome(False, profit, h)
    out = liquidation_deltas(position, prices, protocol)
    return LiquidationOutcome(True, profit, h, out.repaid, out.collateral, out.debt_reduction,
                              out.repaid_usd, out.seized_usd)


# Relative slack under which a computed remainder is snapped to exactly zero.
_SNAP = 1e-9


def _subtract(current: float, amount: float, what: str) -> float:
    left = current - amount
    if left < 0:
        if left >= -_SNAP * max(abs(current), abs(amount), 1.0):
            return 0.0
        raise InconsistentStateError(f"{what} would become negative ({current} - {amount})")
    return left


def apply_liquidation(snapshot, position: Position, outcome: LiquidationOutcome):
    """Return a new snapshot with ``outcome`` applied to ``position``.

    The protocol's stake column moves by the outcome deltas, the position's
    collateral and debt shrink, and for a CDP the burnt stablecoin leaves
    circulation together with the seized collateral that backed it.
    """
    if not outcome.triggered:
        return snapshot
    return snapshot.apply_outcomes([(position, outcome)])
