"""Double-counting-aware DeFi metrics: TVL, TVR, ledgers and shock simulation."""

__version__ = "0.1.0"

from .bytecode import Verdict, classify_bytecode, classify_hex, disassemble
from .contagion import ShockScenario, SimResult, depeg_point, liquidation_fixed_point, sensitivity_curve
from .estimators import SensitivityAnalysis, TVRMetrics
from .exceptions import DefiTvrError, SchemaError
from .io import load_scenario, load_snapshot, save_snapshot
from .ledger import Ledger, Transaction, balance_sheet, consolidate, journalize, protocol_tvr, replay
from .metrics import adjusted_tvl, metric_report, money_multiplier, tvl, tvl_decomposition, tvr
from .protocols import Position, Protocol, ProtocolKind, health_factor, liquidation_deltas, liquidation_profit
from .snapshot import Snapshot
from .stats import correlate_table, log_returns, spearman
from .tokens import Token, TokenKind, resolve_prices

__all__ = [
    "DefiTvrError", "Ledger", "Position", "Protocol", "ProtocolKind", "SchemaError",
    "SensitivityAnalysis", "ShockScenario", "SimResult", "Snapshot", "TVRMetrics", "Token",
    "TokenKind", "Transaction", "Verdict", "adjusted_tvl", "balance_sheet", "classify_bytecode",
    "classify_hex", "consolidate", "correlate_table", "depeg_point", "disassemble",
    "health_factor", "journalize", "liquidation_deltas", "liquidation_fixed_point",
    "liquidation_profit", "load_scenario", "load_snapshot", "log_returns", "metric_report",
    "money_multiplier", "protocol_tvr", "replay", "resolve_prices", "save_snapshot",
    "sensitivity_curve", "spearman", "tvl", "tvl_decomposition", "tvr",
]
