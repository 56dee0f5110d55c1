"""Snapshot and scenario files (JSON, ``schema_version`` 1) and hex lists.

Snapshot file::

    {
      "schema_version": 1,
      "category_lists": {"native": ["ETH"], "governance": [], "ncb_stablecoin": ["USDC"]},
      "tokens": [
        {"id": "ETH", "kind": "plain"},
        {"id": "stETH", "kind": "derivative", "supply": 1.0,
         "underlying": [{"token": "ETH", "quantity": 1.0}]},
        {"id": "DAI", "kind": "cdp_stablecoin", "supply": 571.0, "peg": 1.0,
         "underlying": [{"token": "wstETH", "quantity": 1.0}], "fluctuation": 0.0}
      ],
      "prices": {"ETH": 1000.0},
      "protocols": [
        {"id": "Lido", "kind": "passive"},
        {"id": "MakerDAO", "kind": "cdp", "close_factor": 1.0,
         "liquidation_thresholds": {"wstETH": 0.6667}},
        {"id": "Aave", "kind": "lending", "close_factor": 0.5, "liquidation_bonus": 0.05,
         "liquidation_thresholds": {"ETH": 0.825}}
      ],
      "stakes": [{"protocol": "Lido", "token": "ETH", "quantity": 1.0}],
      "positions": [
        {"account": "0xabc", "protocol": "MakerDAO", "collateral": {"wstETH": 1.0},
         "debt": {"DAI": 571.0},
         "redeposits": [{"protocol": "Aave", "token": "DAI", "quantity": 571.0}]}
      ],
      "excluded_protocols": []
    }

A token without ``kind`` is plain when it appears in a category list,
a CDP stablecoin when it has a ``peg`` and a derivative otherwise.

Scenario file::

    {
      "schema_version": 1,
      "shock_token": "ETH",
      "grid": {"start": 0.0, "stop": 0.5, "num": 51},
      "environment": "max_tvl",
      "prices": {"ETH": 4075.03},
      "close_factors": {"MakerDAO": 1.0, "Aave": 0.5},
      "liquidation_bonuses": {"Aave": 0.05},
      "gas_limit": 500000, "gas_price": 0.000485, "gas_scale": 1.0,
      "max_rounds": 100
    }

``grid`` may also be a plain list.  ``environment`` fills ``gas_price`` and
the ETH price from the built-in table unless given explicitly.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Mapping

from .contagion import ENVIRONMENTS, ShockScenario, linear_grid
from .exceptions import SchemaError
from .protocols import Position, Protocol
from .snapshot import Snapshot
from .tokens import DEFAULT_PLAIN_LISTS, PLAIN_CATEGORIES, Token, TokenKind, classify_from_lists

SCHEMA_VERSION = 1
_MISSING = object()


@dataclass(frozen=True)
class SnapshotFile:
    snapshot: Snapshot
    excluded_protocols: tuple[str, ...] = ()
    category_lists: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    description: str = ""


def _read_json(source) -> Any:
    if isinstance(source, (str, os.PathLike)) and not str(source).lstrip().startswith("{"):
        try:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise SchemaError(f"cannot read file: {exc.strerror}", str(source)) from None
    elif hasattr(source, "read"):
        text = source.read()
    else:
        text = str(source)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _get(obj: Mapping, key: str, path: str, kind=None, default=_MISSING):
    if not isinstance(obj, Mapping):
        raise SchemaError("expected an object", path)
    if key not in obj:
        if default is _MISSING:
            raise SchemaError("required field missing", f"{path}.{key}" if path else key)
        return default
    value = obj[key]
    where = f"{path}.{key}" if path else key
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError("expected a number", where)
        if not math.isfinite(value):
            raise SchemaError("expected a finite number", where)
        return float(value)
    if kind is not None and not isinstance(value, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise SchemaError(f"expected {names}", where)
    return value


def _quantity_map(raw, path: str) -> dict[str, float]:
    if not isinstance(raw, Mapping):
        raise SchemaError("expected an object of token -> quantity", path)
    out = {}
    for tid, q in raw.items():
        q = _get(raw, tid, path, float)
        if q < 0:
            raise SchemaError("quantity must be >= 0", f"{path}.{tid}")
        out[str(tid)] = q
    return out


def _check_version(doc, what: str):
    version = _get(doc, "schema_version", "", int, default=SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported {what} schema_version {version} (expected {SCHEMA_VERSION})",
                          "schema_version")


def _parse_token(raw, i: int, lists) -> Token:
    path = f"tokens[{i}]"
    tid = _get(raw, "id", path, str)
    kind = _get(raw, "kind", path, str, default=None)
    peg = _get(raw, "peg", path, float, default=None)
    if kind is None:
        if classify_from_lists(tid, lists):
            kind = TokenKind.PLAIN.value
        elif peg is not None:
            kind = TokenKind.CDP_STABLECOIN.value
        else:
            kind = TokenKind.DERIVATIVE.value
    if kind not in {k.value for k in TokenKind}:
        raise SchemaError(f"unknown token kind {kind!r}", f"{path}.kind")
    basket = []
    for j, item in enumerate(_get(raw, "underlying", path, list, default=[])):
        where = f"{path}.underlying[{j}]"
        if isinstance(item, list) and len(item) == 2:
            item = {"token": item[0], "quantity": item[1]}
        uid = _get(item, "token", where, str)
        q = _get(item, "quantity", where, float)
        if q < 0:
            raise SchemaError("quantity must be >= 0", f"{where}.quantity")
        basket.append((uid, q))
    supply = _get(raw, "supply", path, float, default=0.0)
    if supply < 0:
        raise SchemaError("supply must be >= 0", f"{path}.supply")
    try:
        return Token(tid, TokenKind(kind), supply, tuple(basket), peg,
                     _get(raw, "fluctuation", path, float, default=0.0))
    except SchemaError as exc:
        raise SchemaError(str(exc).split(": ", 1)[-1], path) from None


def _parse_protocol(raw, i: int) -> Protocol:
    path = f"protocols[{i}]"
    pid = _get(raw, "id", path, str)
    kind = _get(raw, "kind", path, str, default="passive")
    thresholds = _get(raw, "liquidation_thresholds", path, dict, default={})
    alphas = {str(t): _get(thresholds, t, f"{path}.liquidation_thresholds", float) for t in thresholds}
    try:
        return Protocol(pid, kind,
                        _get(raw, "close_factor", path, float, default=None),
                        _get(raw, "liquidation_bonus", path, float, default=None),
                        alphas)
    except ValueError as exc:
        raise SchemaError(str(exc).split(": ", 1)[-1], path) from None


def _parse_position(raw, i: int) -> Position:
    path = f"positions[{i}]"
    redeposits = []
    for j, item in enumerate(_get(raw, "redeposits", path, list, default=[])):
        where = f"{path}.redeposits[{j}]"
        q = _get(item, "quantity", where, float)
        if q < 0:
            raise SchemaError("quantity must be >= 0", f"{where}.quantity")
        redeposits.append((_get(item, "protocol", where, str), _get(item, "token", where, str), q))
    return Position(
        _get(raw, "account", path, str),
        _get(raw, "protocol", path, str),
        _quantity_map(_get(raw, "collateral", path, dict, default={}), f"{path}.collateral"),
        _quantity_map(_get(raw, "debt", path, dict, default={}), f"{path}.debt"),
        tuple(redeposits),
    )


def parse_snapshot(doc: Mapping) -> SnapshotFile:
    """Validate a decoded snapshot document and build the snapshot."""
    if not isinstance(doc, Mapping):
        raise SchemaError("snapshot file must be a JSON object")
    _check_version(doc, "snapshot")
    raw_lists = _get(doc, "category_lists", "", dict, default={})
    lists = {k: tuple(v) for k, v in DEFAULT_PLAIN_LISTS.items()}
    for cat, members in raw_lists.items():
        if cat not in PLAIN_CATEGORIES:
            raise SchemaError(f"unknown category {cat!r}", "category_lists")
        if not isinstance(members, list) or not all(isinstance(m, str) for m in members):
            raise SchemaError("expected a list of token ids", f"category_lists.{cat}")
        lists[cat] = tuple(sorted(set(lists.get(cat, ())) | set(members)))
    tokens = [_parse_token(t, i, lists) for i, t in enumerate(_get(doc, "tokens", "", list, default=[]))]
    protocols = [_parse_protocol(p, i) for i, p in enumerate(_get(doc, "protocols", "", list, default=[]))]
    stakes = []
    for i, raw in enumerate(_get(doc, "stakes", "", list, default=[])):
        path = f"stakes[{i}]"
        if isinstance(raw, list) and len(raw) == 3:
            raw = {"protocol": raw[0], "token": raw[1], "quantity": raw[2]}
        q = _get(raw, "quantity", path, float)
        if q < 0:
            raise SchemaError("quantity must be >= 0", f"{path}.quantity")
        stakes.append((_get(raw, "protocol", path, str), _get(raw, "token", path, str), q))
    positions = [_parse_position(p, i) for i, p in enumerate(_get(doc, "positions", "", list, default=[]))]
    raw_prices = _get(doc, "prices", "", dict, default={})
    prices = {str(t): _get(raw_prices, t, "prices", float) for t in raw_prices}
    snap = Snapshot.build(tokens, protocols, stakes, positions, prices)
    excluded = tuple(_get(doc, "excluded_protocols", "", list, default=[]))
    for pid in excluded:
        if pid not in snap.protocols:
            raise SchemaError(f"undeclared protocol {pid}", "excluded_protocols")
    return SnapshotFile(snap, excluded, {k: tuple(v) for k, v in raw_lists.items()},
                        _get(doc, "description", "", str, default=""))


def read_snapshot_file(source) -> SnapshotFile:
    return parse_snapshot(_read_json(source))


def load_snapshot(source) -> Snapshot:
    """Load and validate a snapshot from a path, file object or JSON text."""
    return read_snapshot_file(source).snapshot


def snapshot_to_dict(snapshot: Snapshot, excluded_protocols=(), description: str = "") -> dict:
    tokens = []
    for tok in snapshot.tokens.values():
        rec: dict[str, Any] = {"id": tok.id, "kind": tok.kind.value}
        if not tok.is_plain:
            rec["supply"] = tok.supply
            rec["underlying"] = [{"token": u, "quantity": q} for u, q in tok.underlying]
        if tok.peg is not None:
            rec["peg"] = tok.peg
        if tok.fluctuation:
            rec["fluctuation"] = tok.fluctuation
        tokens.append(rec)
    protocols = []
    for p in snapshot.protocols.values():
        rec = {"id": p.id, "kind": p.kind.value}
        if p.close_factor is not None:
            rec["close_factor"] = p.close_factor
        if p.liquidation_bonus is not None:
            rec["liquidation_bonus"] = p.liquidation_bonus
        if p.liquidation_thresholds:
            rec["liquidation_thresholds"] = dict(p.liquidation_thresholds)
        protocols.append(rec)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tokens": tokens,
        "prices": dict(snapshot.plain_prices),
        "protocols": protocols,
        "stakes": [{"protocol": p, "token": t, "quantity": q} for (p, t), q in snapshot.stakes.items()],
        "positions": [
            {"account": pos.account, "protocol": pos.protocol,
             "collateral": dict(pos.collateral), "debt": dict(pos.debt),
             **({"redeposits": [{"protocol": p, "token": t, "quantity": q} for p, t, q in pos.redeposits]}
                if pos.redeposits else {})}
            for pos in snapshot.positions
        ],
    }
    if excluded_protocols:
        doc["excluded_protocols"] = list(excluded_protocols)
    if description:
        doc["description"] = description
    return doc


def save_snapshot(snapshot: Snapshot, path, excluded_protocols=(), description: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(snapshot_to_dict(snapshot, excluded_protocols, description), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class ScenarioFile:
    scenario: ShockScenario
    prices: Mapping[str, float] = field(default_factory=dict)


def parse_scenario(doc: Mapping) -> ScenarioFile:
    if not isinstance(doc, Mapping):
        raise SchemaError("scenario file must be a JSON object")
    _check_version(doc, "scenario")
    env_name = _get(doc, "environment", "", str, default=None)
    env = {}
    if env_name is not None:
        if env_name not in ENVIRONMENTS:
            raise SchemaError(f"unknown environment {env_name!r}; known: {', '.join(ENVIRONMENTS)}",
                              "environment")
        env = ENVIRONMENTS[env_name]
    shock = _get(doc, "shock_token", "", str)
    raw_grid = _get(doc, "grid", "", (list, dict))
    if isinstance(raw_grid, dict):
        grid = linear_grid(_get(raw_grid, "start", "grid", float), _get(raw_grid, "stop", "grid", float),
                           _get(raw_grid, "num", "grid", int))
    else:
        grid = tuple(_get({"d": d}, "d", f"grid[{i}]", float) for i, d in enumerate(raw_grid))
    raw_prices = _get(doc, "prices", "", dict, default={})
    prices = {str(t): _get(raw_prices, t, "prices", float) for t in raw_prices}
    if env and shock == "ETH" and "ETH" not in prices:
        prices["ETH"] = env["eth_price"]

    def table(name):
        raw = _get(doc, name, "", dict, default={})
        return {str(k): _get(raw, k, name, float) for k in raw}

    scenario = ShockScenario(
        shock_token=shock,
        grid=grid,
        close_factors=table("close_factors"),
        liquidation_bonuses=table("liquidation_bonuses"),
        gas_limit=_get(doc, "gas_limit", "", float, default=500_000.0),
        gas_price=_get(doc, "gas_price", "", float, default=env.get("gas_price", ENVIRONMENTS["max_tvl"]["gas_price"])),
        gas_scale=_get(doc, "gas_scale", "", float, default=1.0),
        max_rounds=_get(doc, "max_rounds", "", int, default=100),
        base_prices=prices,
    )
    return ScenarioFile(scenario, prices)


def load_scenario(source) -> ShockScenario:
    return parse_scenario(_read_json(source)).scenario


def read_hex_file(path) -> list[str]:
    """One hex string per line; blank lines and ``#`` comments are skipped."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise SchemaError(f"cannot read file: {exc.strerror}", str(path)) from None
    return [ln.strip() for ln in lines if ln.strip() and not ln.strip().startswith("#")]
