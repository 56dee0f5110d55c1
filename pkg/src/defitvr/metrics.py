"""TVL, its decomposition, TVR, adjusted TVL and the DeFi money multiplier.

With ``p`` the price vector, ``Q`` the stake matrix (tokens x protocols),
``Q'`` the held matrix, ``tau`` the plain-token flags and ``omega`` the PLF
flags::

    TVL = p' Q 1
    TVR = (p * tau)' Q' 1
    M   = TVL / TVR
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .exceptions import DanglingReferenceError, UndefinedMultiplierError


@dataclass(frozen=True)
class Decomposition:
    plain_non_plf: float
    plain_plf: float
    derivative_non_plf: float
    derivative_plf: float

    def total(self) -> float:
        return self.plain_non_plf + self.plain_plf + self.derivative_non_plf + self.derivative_plf

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.plain_non_plf, self.plain_plf, self.derivative_non_plf, self.derivative_plf)


@dataclass(frozen=True)
class ProtocolRatio:
    tvl: float
    tvr: float
    ratio: float | None


@dataclass(frozen=True)
class MetricReport:
    tvl: float
    tvr: float
    tvl_adjusted: float
    multiplier: float | None
    decomposition: Decomposition
    per_protocol: Mapping[str, ProtocolRatio] = field(default_factory=dict)

    CSV_FIELDS = ("tvl", "tvr", "tvl_adjusted", "multiplier", "plain_non_plf", "plain_plf",
                  "derivative_non_plf", "derivative_plf")

    def to_row(self) -> dict[str, float | str]:
        row = {
            "tvl": self.tvl,
            "tvr": self.tvr,
            "tvl_adjusted": self.tvl_adjusted,
            "multiplier": "" if self.multiplier is None else self.multiplier,
        }
        row.update(zip(self.CSV_FIELDS[4:], self.decomposition.as_tuple()))
        return row

    def to_text(self) -> str:
        mult = "undefined" if self.multiplier is None else f"{self.multiplier:.4f}"
        d = self.decomposition
        lines = [
            f"TVL              {self.tvl:>18,.2f}",
            f"TVR              {self.tvr:>18,.2f}",
            f"TVL (adjusted)   {self.tvl_adjusted:>18,.2f}",
            f"Money multiplier {mult:>18}",
            "",
            "TVL decomposition",
            f"  plain / non-PLF      {d.plain_non_plf:>18,.2f}",
            f"  plain / PLF          {d.plain_plf:>18,.2f}",
            f"  derivative / non-PLF {d.derivative_non_plf:>18,.2f}",
            f"  derivative / PLF     {d.derivative_plf:>18,.2f}",
        ]
        if self.per_protocol:
            lines += ["", f"{'protocol':<16}{'TVL':>18}{'TVR':>18}{'TVL/TVR':>10}"]
            for pid, pr in self.per_protocol.items():
                ratio = "-" if pr.ratio is None else f"{pr.ratio:.3f}"
                lines.append(f"{pid:<16}{pr.tvl:>18,.2f}{pr.tvr:>18,.2f}{ratio:>10}")
        return "\n".join(lines)


def _prices(snapshot, prices):
    if prices is None:
        prices = snapshot.prices()
    return snapshot.price_vector(prices)


def tvl(snapshot, prices: Mapping[str, float] | None = None) -> float:
    if not snapshot.tokens or not snapshot.protocols:
        return 0.0
    p = _prices(snapshot, prices)
    Q = snapshot.stake_matrix()
    return float(p @ Q @ np.ones(Q.shape[1]))


def tvl_decomposition(snapshot, prices: Mapping[str, float] | None = None,
                      tau: np.ndarray | None = None, omega: np.ndarray | None = None) -> Decomposition:
    """Split TVL by token kind (plain/derivative) and protocol kind (PLF or not)."""
    if not snapshot.tokens or not snapshot.protocols:
        return Decomposition(0.0, 0.0, 0.0, 0.0)
    p = _prices(snapshot, prices)
    tau = snapshot.plain_vector() if tau is None else np.asarray(tau, dtype=float)
    omega = snapshot.plf_vector() if omega is None else np.asarray(omega, dtype=float)
    Q = snapshot.stake_matrix()
    plain = (p * tau) @ Q
    deriv = (p * (1 - tau)) @ Q
    return Decomposition(
        float(plain @ (1 - omega)),
        float(plain @ omega),
        float(deriv @ (1 - omega)),
        float(deriv @ omega),
    )


def tvr(snapshot, prices: Mapping[str, float] | None = None, tau: np.ndarray | None = None) -> float:
    if not snapshot.tokens or not snapshot.protocols:
        return 0.0
    p = _prices(snapshot, prices)
    tau = snapshot.plain_vector() if tau is None else np.asarray(tau, dtype=float)
    Qh = snapshot.held_matrix()
    return float((p * tau) @ Qh @ np.ones(Qh.shape[1]))


def adjusted_tvl(snapshot, prices: Mapping[str, float] | None = None,
                 excluded_protocols: Iterable[str] = ()) -> float:
    """TVL over every protocol not in ``excluded_protocols``.

    Mirrors tracker dashboards that drop whole protocols deemed to deposit
    into others.
    """
    excluded = set(excluded_protocols)
    unknown = excluded - set(snapshot.protocols)
    if unknown:
        raise DanglingReferenceError("unknown protocol(s): " + ", ".join(sorted(unknown)),
                                     "excluded_protocols")
    if not snapshot.tokens or not snapshot.protocols:
        return 0.0
    p = _prices(snapshot, prices)
    Q = snapshot.stake_matrix()
    keep = np.array([0.0 if pid in excluded else 1.0 for pid in snapshot.protocols])
    return float(p @ Q @ keep)


def money_multiplier(tvl_value: float, tvr_value: float) -> float:
    if not tvr_value > 0:
        raise UndefinedMultiplierError("TVR is zero; the money multiplier is undefined")
    return tvl_value / tvr_value


def protocol_ratios(snapshot, prices: Mapping[str, float] | None = None,
                    tau: np.ndarray | None = None) -> dict[str, ProtocolRatio]:
    """Per-protocol TVL, TVR and TVL/TVR; the ratio is None when TVR is 0."""
    if not snapshot.protocols:
        return {}
    if not snapshot.tokens:
        return {pid: ProtocolRatio(0.0, 0.0, None) for pid in snapshot.protocols}
    p = _prices(snapshot, prices)
    tau = snapshot.plain_vector() if tau is None else np.asarray(tau, dtype=float)
    col_tvl = p @ snapshot.stake_matrix()
    col_tvr = (p * tau) @ snapshot.held_matrix()
    out = {}
    for pid, a, b in zip(snapshot.protocols, col_tvl, col_tvr):
        out[pid] = ProtocolRatio(float(a), float(b), float(a / b) if b > 0 else None)
    return out


def metric_report(snapshot, prices: Mapping[str, float] | None = None,
                  excluded_protocols: Iterable[str] = ()) -> MetricReport:
    if prices is None and snapshot.tokens:
        prices = snapshot.prices()
    total = tvl(snapshot, prices)
    redeemable = tvr(snapshot, prices)
    try:
        mult = money_multiplier(total, redeemable)
    except UndefinedMultiplierError:
        mult = None
    return MetricReport(
        tvl=total,
        tvr=redeemable,
        tvl_adjusted=adjusted_tvl(snapshot, prices, excluded_protocols),
        multiplier=mult,
        decomposition=tvl_decomposition(snapshot, prices),
        per_protocol=protocol_ratios(snapshot, prices),
    )


__all__ = [
    "Decomposition", "MetricReport", "ProtocolRatio", "adjusted_tvl", "metric_report",
    "money_multiplier", "protocol_ratios", "tvl", "tvl_decomposition", "tvr",
]
