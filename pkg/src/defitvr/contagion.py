"""Price-shock contagion: repricing, depegs and liquidation cascades.

A shock scales the exogenous price of one plain token by ``1 - d``.  The
engine then iterates rounds until no position is liquidated:

1. resolve every derivative price from its basket;
2. evaluate all positions (sorted by account, then protocol) against the
   round-start prices;
3. apply every triggered liquidation at once.

``sensitivity_curve`` repeats this for each ``d`` on a grid, always starting
from the unshocked snapshot, and reports the change in TVL and TVR.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .exceptions import DefiTvrError, SchemaError
from .metrics import tvl, tvr
from .protocols import LiquidationOutcome, ProtocolKind, evaluate_liquidation
from .tokens import PegStatus, peg_status

# Sensitivity-test environments (ETH price in USD, gas price in USD per gas
# unit).  Close factors: Aave 0.5, MakerDAO 1; gas limit 500,000.
ENVIRONMENTS = {
    "max_tvl": {"date": "2021-12-02", "eth_price": 4075.03, "gas_price": 4.85e-4},
    "luna_collapse": {"date": "2022-05-09", "eth_price": 2249.89, "gas_price": 1.50e-4},
    "ftx_collapse": {"date": "2022-11-08", "eth_price": 1334.29, "gas_price": 7.60e-5},
}
DEFAULT_GAS_LIMIT = 500_000
DEFAULT_GAS_PRICE = ENVIRONMENTS["max_tvl"]["gas_price"]
DEFAULT_MAX_ROUNDS = 100


@dataclass(frozen=True)
class ShockScenario:
    """A decline grid for one plain token plus parameter overrides.

    ``close_factors`` and ``liquidation_bonuses`` map protocol ids to the
    value used instead of the snapshot's; ``base_prices`` replaces plain
    prices before the baseline is taken.  Gas per liquidation costs
    ``gas_limit * gas_price * gas_scale`` USD.
    """

    shock_token: str
    grid: tuple[float, ...] = (0.0,)
    close_factors: Mapping[str, float] = field(default_factory=dict)
    liquidation_bonuses: Mapping[str, float] = field(default_factory=dict)
    gas_limit: float = DEFAULT_GAS_LIMIT
    gas_price: float = DEFAULT_GAS_PRICE
    gas_scale: float = 1.0
    max_rounds: int = DEFAULT_MAX_ROUNDS
    base_prices: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        grid = tuple(float(d) for d in self.grid)
        object.__setattr__(self, "base_prices", {str(k): float(v) for k, v in self.base_prices.items()})
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "close_factors", dict(self.close_factors))
        object.__setattr__(self, "liquidation_bonuses", dict(self.liquidation_bonuses))
        if not grid:
            raise SchemaError("decline grid is empty", "scenario.grid")
        if any(not 0 <= d <= 1 for d in grid):
            raise SchemaError("declines must lie in [0, 1]", "scenario.grid")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise SchemaError("decline grid must be sorted ascending", "scenario.grid")
        if self.gas_limit < 0 or self.gas_price < 0 or self.gas_scale < 0:
            raise SchemaError("gas parameters must be >= 0", "scenario.gas")
        if int(self.max_rounds) < 1:
            raise SchemaError("max_rounds must be a positive integer", "scenario.max_rounds")

    @property
    def gas_fees(self) -> float:
        return self.gas_limit * self.gas_price * self.gas_scale

    def with_overrides(self, **changes) -> "ShockScenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class LiquidationEvent:
    round: int
    account: str
    protocol: str
    health: float
    profit: float
    repaid_usd: float
    seized_usd: float
    outcome: LiquidationOutcome


@dataclass(frozen=True)
class Cascade:
    """Outcome of :func:`liquidation_fixed_point`.

    ``peg_history[r]`` holds the peg status of every CDP stablecoin at the
    start of round ``r + 1``; the last entry is the final state.
    """

    snapshot: object
    events: tuple[LiquidationEvent, ...]
    rounds: int
    converged: bool
    peg_history: tuple[Mapping[str, PegStatus], ...]


@dataclass(frozen=True)
class SimRow:
    d: float
    delta_tvl: float
    delta_tvr: float
    events: int
    seized_usd: float
    repaid_usd: float
    depegs: tuple[tuple[str, float], ...]
    rounds: int
    converged: bool
    tvl: float
    tvr: float
    tvl_before_liquidation: float
    tvr_before_liquidation: float


@dataclass(frozen=True)
class SimResult:
    scenario: ShockScenario
    baseline_tvl: float
    baseline_tvr: float
    stablecoins: tuple[str, ...]
    rows: tuple[SimRow, ...]

    CSV_FIELDS = ("d", "delta_tvl", "delta_tvr", "events", "seized_usd", "depegged", "rounds", "converged")

    @property
    def grid(self) -> list[float]:
        return [r.d for r in self.rows]

    @property
    def delta_tvl(self) -> list[float]:
        return [r.delta_tvl for r in self.rows]

    @property
    def delta_tvr(self) -> list[float]:
        return [r.delta_tvr for r in self.rows]

    def depeg_point(self, token: str) -> float | None:
        return depeg_point(self, token)

    def to_csv(self, stream=None) -> str:
        """Write the curve as CSV; returns the text when ``stream`` is None."""
        buf = io.StringIO() if stream is None else stream
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_FIELDS)
        for r in self.rows:
            depegged = ";".join(f"{sid}:{ratio!r}" for sid, ratio in r.depegs)
            writer.writerow([repr(r.d), repr(r.delta_tvl), repr(r.delta_tvr), r.events,
                             repr(r.seized_usd), depegged, r.rounds, int(r.converged)])
        return buf.getvalue() if stream is None else ""


def apply_shock(snapshot, token: str, d: float):
    """Scale the exogenous price of plain ``token`` by ``1 - d``."""
    tok = snapshot.tokens.get(token)
    if tok is None:
        raise SchemaError(f"unknown token {token}", "scenario.shock_token")
    if not tok.is_plain:
        raise SchemaError(f"{token} is a derivative; only plain tokens can be shocked",
                          "scenario.shock_token")
    if not 0 <= d <= 1:
        raise SchemaError(f"decline {d} outside [0, 1]", "scenario.grid")
    if d == 0:
        return snapshot
    return snapshot.with_plain_prices({token: snapshot.plain_prices[token] * (1 - d)})


def apply_overrides(snapshot, scenario: ShockScenario):
    """Copy of ``snapshot`` with the scenario's prices, close factors and bonuses."""
    for tid in scenario.base_prices:
        if tid not in snapshot.tokens or not snapshot.tokens[tid].is_plain:
            raise SchemaError(f"{tid} is not a plain token of the snapshot", "scenario.prices")
    if scenario.base_prices:
        snapshot = snapshot.with_plain_prices(scenario.base_prices)
    if not scenario.close_factors and not scenario.liquidation_bonuses:
        return snapshot
    protocols = dict(snapshot.protocols)
    for name, table in (("close_factor", scenario.close_factors),
                        ("liquidation_bonus", scenario.liquidation_bonuses)):
        for pid, value in table.items():
            if pid not in protocols:
                raise SchemaError(f"override for unknown protocol {pid}", f"scenario.{name}s")
            protocols[pid] = replace(protocols[pid], **{name: float(value)})
    return replace(snapshot, protocols=protocols)


def peg_statuses(snapshot, prices: Mapping[str, float]) -> dict[str, PegStatus]:
    return {tid: peg_status(tok, prices) for tid, tok in snapshot.tokens.items() if tok.is_stablecoin}


def liquidation_fixed_point(snapshot, gas_fees: float = 0.0,
                            max_rounds: int = DEFAULT_MAX_ROUNDS) -> Cascade:
    """Run liquidation rounds until one produces no liquidation.

    Hitting ``max_rounds`` is reported through ``converged=False``.
    """
    events: list[LiquidationEvent] = []
    history: list[dict[str, PegStatus]] = []
    order = sorted(snapshot.positions, key=lambda p: p.key)
    keys = [p.key for p in order]
    converged = False
    rounds = 0
    for rnd in range(1, int(max_rounds) + 1):
        rounds = rnd
        prices = snapshot.prices()
        history.append(peg_statuses(snapshot, prices))
        current = {p.key: p for p in snapshot.positions}
        updates = []
        for key in keys:
            pos = current[key]
            proto = snapshot.protocols[pos.protocol]
            if proto.kind is ProtocolKind.PASSIVE or not pos.debt:
                continue
            out = evaluate_liquidation(pos, prices, proto, gas_fees)
            if out.triggered:
                updates.append((pos, out))
                events.append(LiquidationEvent(rnd, pos.account, pos.protocol, out.health,
                                               out.profit, out.repaid_usd, out.seized_usd, out))
        if not updates:
            converged = True
            break
        snapshot = snapshot.apply_outcomes(updates)
    if not converged:
        history.append(peg_statuses(snapshot, snapshot.prices()))
    return Cascade(snapshot, tuple(events), rounds, converged, tuple(history))


def run_point(snapshot, scenario: ShockScenario, d: float, baseline: tuple[float, float]) -> SimRow:
    shocked = apply_shock(snapshot, scenario.shock_token, d)
    pre_prices = shocked.prices()
    tvl_pre = tvl(shocked, pre_prices)
    tvr_pre = tvr(shocked, pre_prices)
    cascade = liquidation_fixed_point(shocked, scenario.gas_fees, scenario.max_rounds)
    final = cascade.snapshot
    prices = final.prices()
    total, redeemable = tvl(final, prices), tvr(final, prices)
    depegs = tuple((sid, st.ratio) for sid, st in sorted(cascade.peg_history[-1].items()) if not st.pegged)
    return SimRow(
        d=d,
        delta_tvl=total - baseline[0],
        delta_tvr=redeemable - baseline[1],
        events=len(cascade.events),
        seized_usd=sum((e.seized_usd for e in cascade.events), 0.0),
        repaid_usd=sum((e.repaid_usd for e in cascade.events), 0.0),
        depegs=depegs,
        rounds=cascade.rounds,
        converged=cascade.converged,
        tvl=total,
        tvr=redeemable,
        tvl_before_liquidation=tvl_pre,
        tvr_before_liquidation=tvr_pre,
    )


def sensitivity_curve(snapshot, scenario: ShockScenario) -> SimResult:
    """Change in TVL and TVR at each decline of the scenario grid.

    The baseline is the unshocked snapshot as given, before any liquidation.
    """
    base = apply_overrides(snapshot, scenario)
    apply_shock(base, scenario.shock_token, 0.0)
    prices = base.prices()
    baseline = (tvl(base, prices), tvr(base, prices))
    rows = tuple(run_point(base, scenario, d, baseline) for d in scenario.grid)
    stablecoins = tuple(sorted(t for t, tok in base.tokens.items() if tok.is_stablecoin))
    return SimResult(scenario, baseline[0], baseline[1], stablecoins, rows)


def depeg_point(result: SimResult, token: str) -> float | None:
    """Smallest grid decline at which ``token`` ends below its peg."""
    if token not in result.stablecoins:
        raise DefiTvrError(f"{token} is not a CDP stablecoin in this run")
    for row in result.rows:
        if any(sid == token for sid, _ in row.depegs):
            return row.d
    return None


def linear_grid(start: float, stop: float, num: int) -> tuple[float, ...]:
    """``num`` evenly spaced declines, rounded to 12 decimals for stable CSVs."""
    if num < 1:
        raise SchemaError("grid needs at least one point", "scenario.grid.num")
    if num == 1:
        return (float(start),)
    step = (stop - start) / (num - 1)
    return tuple(round(start + i * step, 12) for i in range(num))


def simulate_many(snapshot, scenarios: Iterable[ShockScenario]) -> list[SimResult]:
    return [sensitivity_curve(snapshot, sc) for sc in scenarios]


__all__: Sequence[str] = [
    "Cascade", "ENVIRONMENTS", "LiquidationEvent", "ShockScenario", "SimResult", "SimRow",
    "apply_overrides", "apply_shock", "depeg_point", "linear_grid", "liquidation_fixed_point",
    "peg_statuses", "sensitivity_curve",
]
