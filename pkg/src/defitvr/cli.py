"""Command-line entry point: ``defitvr <command> ...``.

Exit status is 0 on success, 1 on a domain error (bad file content,
inconsistent state) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import __version__
from .bytecode import classify_hex
from .contagion import sensitivity_curve
from .exceptions import DefiTvrError, SchemaError
from .fixtures import synthetic_system
from .io import read_hex_file, read_snapshot_file, parse_scenario, _read_json, save_snapshot
from .ledger import balance_sheet, consolidate, protocol_tvr, replay_text, sheets_csv
from .metrics import MetricReport, metric_report
from .stats import correlate_table, load_series

SCHEMA_HELP = """\
file formats (JSON, "schema_version": 1):
  snapshot  tokens[{id, kind, supply, underlying[{token, quantity}], peg}],
            prices{token: usd}, protocols[{id, kind, close_factor,
            liquidation_bonus, liquidation_thresholds{token: alpha}}],
            stakes[{protocol, token, quantity}],
            positions[{account, protocol, collateral{}, debt{}, redeposits[]}]
  scenario  shock_token, grid [..] or {start, stop, num}, environment,
            prices{}, close_factors{}, liquidation_bonuses{}, gas_limit,
            gas_price, gas_scale, max_rounds
  script    JSON Lines: {"template": ..., "holder": ..., <params>} or
            {"checkpoint": label}
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n\n{SCHEMA_HELP}")
        raise SystemExit(2)


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_compute(args) -> int:
    sf = read_snapshot_file(args.snapshot)
    excluded = args.exclude if args.exclude is not None else sf.excluded_protocols
    report = metric_report(sf.snapshot, excluded_protocols=excluded)
    if args.format == "csv":
        import io

        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=MetricReport.CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in report.to_row().items()})
        _write(buf.getvalue(), args.output)
    else:
        _write(report.to_text() + "\n", args.output)
    return 0


def _parse_overrides(items, what):
    out = {}
    for item in items or ():
        pid, sep, value = item.partition("=")
        try:
            out[pid] = float(value)
        except ValueError:
            sep = ""
        if not sep or not pid:
            raise SchemaError(f"expected PROTOCOL=VALUE, got {item!r}", what)
    return out


def _cmd_simulate(args) -> int:
    snap = read_snapshot_file(args.snapshot).snapshot
    scenario = parse_scenario(_read_json(args.scenario)).scenario
    changes = {}
    if args.gas_scale is not None:
        changes["gas_scale"] = args.gas_scale
    if args.close_factor:
        changes["close_factors"] = {**scenario.close_factors, **_parse_overrides(args.close_factor, "--close-factor")}
    if changes:
        scenario = scenario.with_overrides(**changes)
    result = sensitivity_curve(snap, scenario)
    _write(result.to_csv(), args.output)
    return 0


def _cmd_ledger(args) -> int:
    with open(args.script, encoding="utf-8") as fh:
        run = replay_text(fh.read())
    led = run.ledger
    sheets = [balance_sheet(led, h) for h in led.holders]
    protocols = [s for s in sheets if s.holder in led.protocol_holders]
    if not args.no_consolidate and protocols:
        sheets.append(consolidate(protocols))
    if args.format == "csv":
        _write(sheets_csv(sheets), args.output)
    else:
        text = "\n\n".join(s.to_text() for s in sheets)
        for pid in args.protocol_tvr or ():
            users = [s for s in sheets if s.holder in led.user_holders]
            text += f"\n\nprotocol TVR {pid}: {float(protocol_tvr(users, pid)):,.2f}"
        _write(text + "\n", args.output)
    return 0


def _cmd_classify(args) -> int:
    items = []
    for arg in args.inputs:
        if os.path.isfile(arg):
            items += [(f"{arg}:{i + 1}", h) for i, h in enumerate(read_hex_file(arg))]
        else:
            items.append((arg if len(arg) <= 20 else arg[:17] + "...", arg))
    rows = []
    for label, text in items:
        res = classify_hex(text)
        evidence = ";".join(f"{off}:{name}" for off, name in res.evidence)
        rows.append((label, res.verdict.value, evidence))
    if args.format == "csv":
        import io

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["source", "verdict", "evidence"])
        writer.writerows(rows)
        _write(buf.getvalue(), args.output)
    else:
        _write("".join(f"{label}\t{verdict}\t{evidence}\n" for label, verdict, evidence in rows), args.output)
    return 0


def _cmd_correlate(args) -> int:
    table = load_series(args.table)
    pairs = None
    if args.pairs:
        pairs = []
        for item in args.pairs:
            a, sep, b = item.partition(":")
            if not sep:
                raise SchemaError(f"expected X:Y, got {item!r}", "--pairs")
            pairs.append((a, b))
    result = correlate_table(table, pairs, use_log_returns=args.log_returns)
    _write(result.to_csv(), args.output)
    return 0


def _cmd_generate(args) -> int:
    snap = synthetic_system(seed=args.seed, n_vaults=args.vaults, n_loans=args.loans)
    if args.output:
        save_snapshot(snap, args.output, description=f"synthetic system, seed {args.seed}")
    else:
        from .io import snapshot_to_dict

        json.dump(snapshot_to_dict(snap, description=f"synthetic system, seed {args.seed}"), sys.stdout, indent=2)
        sys.stdout.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="defitvr", description="TVL/TVR metrics, ledgers and shock simulation.",
                     epilog=SCHEMA_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compute", help="TVL, TVR, adjusted TVL and money multiplier of a snapshot")
    p.add_argument("snapshot")
    p.add_argument("--exclude", nargs="*", metavar="PROTOCOL", help="protocols dropped from adjusted TVL")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_compute)

    p = sub.add_parser("simulate", help="sensitivity curve of a snapshot under a scenario (CSV)")
    p.add_argument("snapshot")
    p.add_argument("scenario")
    p.add_argument("-o", "--output")
    p.add_argument("--gas-scale", type=float)
    p.add_argument("--close-factor", action="append", metavar="PROTOCOL=VALUE")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("ledger", help="replay a transaction script and print balance sheets")
    p.add_argument("script")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--no-consolidate", action="store_true")
    p.add_argument("--protocol-tvr", action="append", metavar="PROTOCOL")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_ledger)

    p = sub.add_parser("classify", help="classify token contracts from EVM bytecode")
    p.add_argument("inputs", nargs="+", metavar="HEX_OR_FILE")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("correlate", help="Spearman correlation table of a dated series CSV")
    p.add_argument("table")
    p.add_argument("--pairs", nargs="*", metavar="X:Y")
    p.add_argument("--log-returns", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_correlate)

    p = sub.add_parser("generate", help="write a synthetic snapshot for stress runs")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--vaults", type=int, default=120)
    p.add_argument("--loans", type=int, default=80)
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DefiTvrError, OSError) as exc:
        sys.stderr.write(f"defitvr {args.command}: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
