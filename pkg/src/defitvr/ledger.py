"""Double-entry bookkeeping for DeFi protocols and their users.

Amounts are USD held as :class:`fractions.Fraction`, so entries balance and
sheets foot exactly; floats passed in are converted without rounding and
numbers read from scripts are parsed from their decimal text.

Protocol sheets use the protocol as holder.  User sheets use the account as
holder and tag receivables/payables with the protocol they are held
against (the ``counterparty``), which :func:`protocol_tvr` filters on.

Every template is value based: the receipt side of a deposit is booked at
the deposited value, so an entry can only be unbalanced when built by hand.
"""

from __future__ import annotations

import csv
import enum
import inspect
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .exceptions import SchemaError, UnbalancedEntryError, UnknownHolderError, UnknownTemplateError


class Category(str, enum.Enum):
    VALUE_LOCKED = "ValueLocked"
    RECEIVABLES = "Receivables"
    CASH = "Cash"
    PAYABLES = "Payables"
    NEW_MONEY = "NewMoney"
    UNREALIZED_GAIN = "UnrealizedGain"
    REALIZED_GAIN = "RealizedGain"
    INITIAL_DEPOSIT = "InitialDeposit"


ASSETS = (Category.VALUE_LOCKED, Category.RECEIVABLES, Category.CASH)
LIABILITIES = (Category.PAYABLES, Category.NEW_MONEY)
NET = (Category.UNREALIZED_GAIN, Category.REALIZED_GAIN, Category.INITIAL_DEPOSIT)

LABELS = {
    Category.VALUE_LOCKED: "Value Locked",
    Category.RECEIVABLES: "Receivables",
    Category.CASH: "Cash",
    Category.PAYABLES: "Payables",
    Category.NEW_MONEY: "New Money",
    Category.UNREALIZED_GAIN: "Unrealized Gain",
    Category.REALIZED_GAIN: "Realized Gain",
    Category.INITIAL_DEPOSIT: "Initial Deposit Value",
}

VL, REC, CASH = Category.VALUE_LOCKED, Category.RECEIVABLES, Category.CASH
PAY, NM = Category.PAYABLES, Category.NEW_MONEY
UG, RG, INIT = Category.UNREALIZED_GAIN, Category.REALIZED_GAIN, Category.INITIAL_DEPOSIT


def money(x, what: str = "amount") -> Fraction:
    """Exact USD amount from an int, float, decimal string or Fraction."""
    try:
        value = Fraction(x) if not isinstance(x, str) else Fraction(x.strip())
    except (ValueError, TypeError, OverflowError):
        raise SchemaError(f"{what} is not a finite number: {x!r}") from None
    return value


def _nonneg(x, what: str) -> Fraction:
    value = money(x, what)
    if value < 0:
        raise SchemaError(f"{what} must be >= 0, got {x}")
    return value


@dataclass(frozen=True, order=True)
class AccountKey:
    holder: str
    category: Category
    token: str
    counterparty: str = ""

    def __str__(self):
        cp = f" @{self.counterparty}" if self.counterparty else ""
        return f"{self.holder}:{LABELS[Category(self.category)]} - {self.token}{cp}"


@dataclass(frozen=True)
class JournalEntry:
    description: str
    debits: tuple[tuple[AccountKey, Fraction], ...]
    credits: tuple[tuple[AccountKey, Fraction], ...]
    template: str = ""

    @property
    def total_debits(self) -> Fraction:
        return sum((a for _, a in self.debits), Fraction(0))

    @property
    def total_credits(self) -> Fraction:
        return sum((a for _, a in self.credits), Fraction(0))

    @property
    def balanced(self) -> bool:
        return self.total_debits == self.total_credits

    def reversed(self) -> "JournalEntry":
        return JournalEntry(f"reversal of {self.description}", self.credits, self.debits, self.template)

    def lines(self) -> list[tuple[str, str, float]]:
        out = [("Dr", str(k), float(a)) for k, a in self.debits]
        out += [("Cr", str(k), float(a)) for k, a in self.credits]
        return out


@dataclass(frozen=True)
class Transaction:
    template: str
    holder: str
    params: Mapping[str, object] = field(default_factory=dict)


# -- templates -----------------------------------------------------------------
#
# Each returns (description, debits, credits, links).  ``links`` feed the
# intra-protocol offsets used by consolidation:
#   ("receipt", token, underlying)       supply receipt token and what it wraps
#   ("debt", token, underlying)          debt token and the borrowed token
#   ("borrowed", token, receipt, value)  supply funded by borrowing


def _stake(h, token, receipt, quantity, price):
    v = _nonneg(quantity, "quantity") * _nonneg(price, "price")
    return (f"{h}: stake {token} for {receipt}",
            [((h, VL, token), v)], [((h, PAY, receipt), v)], [])


def _burn(h, token, receipt, quantity, price):
    v = _nonneg(quantity, "quantity") * _nonneg(price, "price")
    return (f"{h}: burn {receipt} to redeem {token}",
            [((h, PAY, receipt), v)], [((h, VL, token), v)], [])


def _cdp_borrow(h, collateral, collateral_quantity, collateral_price, stablecoin, minted, stablecoin_price=1):
    vt = _nonneg(collateral_quantity, "collateral_quantity") * _nonneg(collateral_price, "collateral_price")
    vs = _nonneg(minted, "minted") * _nonneg(stablecoin_price, "stablecoin_price")
    return (f"{h}: lock {collateral}, mint {stablecoin}",
            [((h, REC, stablecoin), vs), ((h, VL, collateral), vt)],
            [((h, NM, stablecoin), vs), ((h, PAY, collateral), vt)], [])


def _stability_fee(h, stablecoin, accrued, stablecoin_price=1):
    v = _nonneg(accrued, "accrued") * _nonneg(stablecoin_price, "stablecoin_price")
    return (f"{h}: stability fee on {stablecoin}",
            [((h, REC, stablecoin), v)], [((h, UG, stablecoin), v)], [])


def _cdp_repay(h, stablecoin, repaid, collateral, withdrawn, collateral_price, stablecoin_price=1):
    vs = _nonneg(repaid, "repaid") * _nonneg(stablecoin_price, "stablecoin_price")
    vt = _nonneg(withdrawn, "withdrawn") * _nonneg(collateral_price, "collateral_price")
    return (f"{h}: repay {stablecoin}, withdraw {collateral}",
            [((h, NM, stablecoin), vs), ((h, PAY, collateral), vt)],
            [((h, REC, stablecoin), vs), ((h, VL, collateral), vt)], [])


def _appreciation(h, token, quantity, price_change, liability=None):
    v = _nonneg(quantity, "quantity") * _nonneg(price_change, "price_change")
    return (f"{h}: {token} appreciates",
            [((h, VL, token), v)], [((h, PAY, liability or token), v)], [])


def _depreciation(h, token, quantity, price_change, liability=None):
    v = _nonneg(quantity, "quantity") * _nonneg(price_change, "price_change")
    return (f"{h}: {token} depreciates",
            [((h, PAY, liability or token), v)], [((h, VL, token), v)], [])


def _liquidation_penalty(h, stablecoin, debt, penalty, accrued=0, stablecoin_price=1):
    base = _nonneg(debt, "debt") + _nonneg(accrued, "accrued")
    v = _nonneg(penalty, "penalty") * base * _nonneg(stablecoin_price, "stablecoin_price")
    return (f"{h}: liquidation penalty on {stablecoin}",
            [((h, REC, stablecoin), v)], [((h, UG, stablecoin), v)], [])


def _cdp_liquidation(h, stablecoin, debt, collateral, collateral_quantity, collateral_price,
                     accrued=0, penalty=0, stablecoin_price=1):
    q, i = _nonneg(debt, "debt"), _nonneg(accrued, "accrued")
    zeta, ps = _nonneg(penalty, "penalty"), _nonneg(stablecoin_price, "stablecoin_price")
    vt = _nonneg(collateral_quantity, "collateral_quantity") * _nonneg(collateral_price, "collateral_price")
    return (f"{h}: settle liquidated {stablecoin} vault",
            [((h, NM, stablecoin), q * ps), ((h, UG, stablecoin), (i + zeta * (q + i)) * ps),
             ((h, PAY, collateral), vt)],
            [((h, REC, stablecoin), (1 + zeta) * (q + i) * ps), ((h, VL, collateral), vt)], [])


def _lending_supply(h, token, receipt, quantity, price, borrowed=False):
    v = _nonneg(quantity, "quantity") * _nonneg(price, "price")
    links = [("receipt", receipt, token)]
    if borrowed:
        links.append(("borrowed", token, receipt, v))
    return (f"{h}: supply {token} for {receipt}",
            [((h, VL, token), v)], [((h, PAY, receipt), v)], links)


def _lending_borrow(h, token, debt_token, quantity, price):
    v = _nonneg(quantity, "quantity") * _nonneg(price, "price")
    return (f"{h}: lend out {token} against {debt_token}",
            [((h, REC, debt_token), v)], [((h, VL, token), v)], [("debt", debt_token, token)])


def _debt_interest(h, token, debt_token, accrued, price):
    v = _nonneg(accrued, "accrued") * _nonneg(price, "price")
    return (f"{h}: interest on {debt_token}",
            [((h, REC, debt_token), v)], [((h, UG, token), v)], [("debt", debt_token, token)])


def _lending_repay(h, token, debt_token, quantity, price):
    v = _nonneg(quantity, "quantity") * _nonneg(price, "price")
    return (f"{h}: {debt_token} repaid in {token}",
            [((h, VL, token), v)], [((h, REC, debt_token), v)], [])


def _lending_liquidation(h, token, debt_token, collateral, receipt, debt, price,
                         close_factor, bonus, accrued=0):
    base = (_nonneg(debt, "debt") + _nonneg(accrued, "accrued"))
    p = _nonneg(price, "price")
    delta, b = _nonneg(close_factor, "close_factor"), _nonneg(bonus, "bonus")
    repaid = delta * base * p
    seized = repaid * (1 + b)
    interest = _nonneg(accrued, "accrued") * p
    return (f"{h}: liquidate {debt_token} against {collateral}",
            [((h, VL, token), repaid), ((h, UG, token), interest), ((h, PAY, receipt), seized)],
            [((h, REC, debt_token), repaid), ((h, RG, receipt), interest), ((h, VL, collateral), seized)],
            [])


def _lp_provide(h, token_a, quantity_a, price_a, token_b, quantity_b, price_b, lp_token):
    va = _nonneg(quantity_a, "quantity_a") * _nonneg(price_a, "price_a")
    vb = _nonneg(quantity_b, "quantity_b") * _nonneg(price_b, "price_b")
    return (f"{h}: provide {token_a}/{token_b} liquidity",
            [((h, VL, token_a), va), ((h, VL, token_b), vb)], [((h, PAY, lp_token), va + vb)], [])


def _lp_remove(h, token_a, quantity_a, price_a, token_b, quantity_b, price_b, lp_token):
    va = _nonneg(quantity_a, "quantity_a") * _nonneg(price_a, "price_a")
    vb = _nonneg(quantity_b, "quantity_b") * _nonneg(price_b, "price_b")
    return (f"{h}: remove {token_a}/{token_b} liquidity",
            [((h, PAY, lp_token), va + vb)], [((h, VL, token_a), va), ((h, VL, token_b), vb)], [])


def _swap(h, token_in, token_out, quantity, price):
    # the pool receives token_in and pays out the same value of token_out
    v = _nonneg(quantity, "quantity") * _nonneg(price, "price")
    return (f"{h}: swap {token_in} in, {token_out} out",
            [((h, VL, token_in), v)], [((h, VL, token_out), v)], [])


def _user_fund(h, token, quantity, price):
    v = _nonneg(quantity, "quantity") * _nonneg(price, "price")
    return (f"{h}: fund with {token}", [((h, CASH, token), v)], [((h, INIT, token), v)], [])


def _user_deposit(h, token, receipt, quantity, price, protocol):
    v = _nonneg(quantity, "quantity") * _nonneg(price, "price")
    return (f"{h}: deposit {token} into {protocol}",
            [((h, REC, receipt, protocol), v)], [((h, CASH, token), v)], [])


def _user_withdraw(h, token, receipt, quantity, price, protocol):
    v = _nonneg(quantity, "quantity") * _nonneg(price, "price")
    return (f"{h}: redeem {receipt} from {protocol}",
            [((h, CASH, token), v)], [((h, REC, receipt, protocol), v)], [])


def _user_wrap(h, receipt, wrapped, quantity, price, protocol, from_protocol=None):
    v = _nonneg(quantity, "quantity") * _nonneg(price, "price")
    return (f"{h}: wrap {receipt} into {wrapped}",
            [((h, REC, wrapped, protocol), v)], [((h, REC, receipt, from_protocol or protocol), v)], [])


def _user_borrow(h, token, debt_token, quantity, price, protocol):
    v = _nonneg(quantity, "quantity") * _nonneg(price, "price")
    return (f"{h}: borrow {token} from {protocol}",
            [((h, CASH, token), v)], [((h, PAY, debt_token, protocol), v)], [])


def _user_repay(h, token, debt_token, quantity, price, protocol):
    v = _nonneg(quantity, "quantity") * _nonneg(price, "price")
    return (f"{h}: repay {token} to {protocol}",
            [((h, PAY, debt_token, protocol), v)], [((h, CASH, token), v)], [])


def _user_swap(h, token_in, token_out, quantity, price):
    v = _nonneg(quantity, "quantity") * _nonneg(price, "price")
    return (f"{h}: swap {token_in} for {token_out}",
            [((h, CASH, token_out), v)], [((h, CASH, token_in), v)], [])


TEMPLATES = {
    "stake": _stake,
    "burn": _burn,
    "cdp_borrow": _cdp_borrow,
    "stability_fee": _stability_fee,
    "cdp_repay": _cdp_repay,
    "appreciation": _appreciation,
    "depreciation": _depreciation,
    "liquidation_penalty": _liquidation_penalty,
    "cdp_liquidation": _cdp_liquidation,
    "lending_supply": _lending_supply,
    "lending_borrow": _lending_borrow,
    "debt_interest": _debt_interest,
    "lending_repay": _lending_repay,
    "lending_liquidation": _lending_liquidation,
    "lp_provide": _lp_provide,
    "lp_remove": _lp_remove,
    "swap": _swap,
    "user_fund": _user_fund,
    "user_deposit": _user_deposit,
    "user_withdraw": _user_withdraw,
    "user_wrap": _user_wrap,
    "user_borrow": _user_borrow,
    "user_repay": _user_repay,
    "user_swap": _user_swap,
}


def _build(tx: Transaction):
    try:
        fn = TEMPLATES[tx.template]
    except KeyError:
        raise UnknownTemplateError(f"unknown transaction template {tx.template!r}") from None
    try:
        inspect.signature(fn).bind(tx.holder, **dict(tx.params))
    except TypeError as exc:
        raise SchemaError(f"bad parameters for {tx.template}: {exc}", tx.template) from None
    return fn(tx.holder, **dict(tx.params))


def _keys(legs):
    return tuple((AccountKey(*k), a) for k, a in legs)


def journalize(transaction: Transaction) -> JournalEntry:
    description, debits, credits, _ = _build(transaction)
    return JournalEntry(description, _keys(debits), _keys(credits), transaction.template)


# -- ledger ----------------------------------------------------------------------


class Ledger:
    """Account balances (debit positive) plus an append-only entry log."""

    def __init__(self, holders: Iterable[str] = ()):
        self._balances: dict[AccountKey, Fraction] = defaultdict(Fraction)
        self._log: list[JournalEntry] = []
        self._holders: list[str] = []
        self._receipts: dict[tuple[str, str], str] = {}
        self._debts: dict[tuple[str, str], str] = {}
        self._borrowed: dict[tuple[str, str, str], Fraction] = defaultdict(Fraction)
        self._users: set[str] = set()
        for h in holders:
            self.register(h)

    def register(self, holder: str) -> None:
        if holder not in self._holders:
            self._holders.append(holder)

    @property
    def holders(self) -> tuple[str, ...]:
        return tuple(self._holders)

    @property
    def user_holders(self) -> tuple[str, ...]:
        """Holders booked through ``user_*`` templates."""
        return tuple(h for h in self._holders if h in self._users)

    @property
    def protocol_holders(self) -> tuple[str, ...]:
        return tuple(h for h in self._holders if h not in self._users)

    @property
    def entries(self) -> tuple[JournalEntry, ...]:
        return tuple(self._log)

    def post(self, entry: JournalEntry) -> "Ledger":
        if not entry.balanced:
            raise UnbalancedEntryError(
                f"debits {entry.total_debits} != credits {entry.total_credits} in {entry.description!r}")
        for key, amount in entry.debits:
            self.register(key.holder)
            self._balances[key] += amount
        for key, amount in entry.credits:
            self.register(key.holder)
            self._balances[key] -= amount
        self._log.append(entry)
        return self

    def record(self, transaction: Transaction) -> JournalEntry:
        """Journalize, post and remember the links a template declares."""
        description, debits, credits, links = _build(transaction)
        entry = JournalEntry(description, _keys(debits), _keys(credits), transaction.template)
        self.post(entry)
        h = transaction.holder
        if transaction.template.startswith("user_"):
            self._users.add(h)
        for link in links:
            if link[0] == "receipt":
                self._receipts[(h, link[1])] = link[2]
            elif link[0] == "debt":
                self._debts[(h, link[1])] = link[2]
            else:
                self._borrowed[(h, link[1], link[2])] += link[3]
        return entry

    def balance(self, key: AccountKey) -> Fraction:
        return self._balances.get(key, Fraction(0))

    def balances(self, include_zero: bool = False) -> dict[AccountKey, Fraction]:
        return {k: v for k, v in sorted(self._balances.items()) if include_zero or v != 0}

    def offsets(self, holder: str) -> list[tuple[AccountKey, AccountKey, Fraction]]:
        """Intra-holder (asset, liability, amount) pairs that consolidation removes.

        A debt receivable offsets the supply payables of the token it lends
        out; a supply funded by borrowing offsets its own receipt payable.
        """
        out = []
        used: dict[AccountKey, Fraction] = defaultdict(Fraction)

        def room(key, sign):
            return sign * self.balance(key) - used[key]

        for (h, debt_token), underlying in sorted(self._debts.items()):
            if h != holder:
                continue
            rec = AccountKey(h, REC, debt_token)
            for (h2, receipt), wrapped in sorted(self._receipts.items()):
                if h2 != holder or wrapped != underlying:
                    continue
                pay = AccountKey(h, PAY, receipt)
                amount = min(room(rec, 1), room(pay, -1))
                if amount > 0:
                    out.append((rec, pay, amount))
                    used[rec] += amount
                    used[pay] += amount
        for (h, token, receipt), value in sorted(self._borrowed.items()):
            if h != holder:
                continue
            vl, pay = AccountKey(h, VL, token), AccountKey(h, PAY, receipt)
            amount = min(value, room(vl, 1), room(pay, -1))
            if amount > 0:
                out.append((vl, pay, amount))
                used[vl] += amount
                used[pay] += amount
        return out


def post(ledger: Ledger, entry: JournalEntry) -> Ledger:
    return ledger.post(entry)


# -- statements ------------------------------------------------------------------


@dataclass(frozen=True)
class SheetLine:
    category: Category
    token: str
    amount: Fraction
    counterparty: str = ""


@dataclass(frozen=True)
class BalanceSheet:
    holder: str
    assets: tuple[SheetLine, ...] = ()
    liabilities: tuple[SheetLine, ...] = ()
    net: tuple[SheetLine, ...] = ()
    offsets: tuple[tuple[AccountKey, AccountKey, Fraction], ...] = ()

    @property
    def total_assets(self) -> Fraction:
        return sum((l.amount for l in self.assets), Fraction(0))

    @property
    def total_liabilities(self) -> Fraction:
        return sum((l.amount for l in self.liabilities), Fraction(0))

    @property
    def total_net(self) -> Fraction:
        return sum((l.amount for l in self.net), Fraction(0))

    @property
    def balanced(self) -> bool:
        return self.total_assets == self.total_liabilities + self.total_net

    def lines(self):
        for section, rows in (("assets", self.assets), ("liabilities", self.liabilities), ("net", self.net)):
            for line in rows:
                yield section, line

    def amount(self, category: Category | str, token: str | None = None) -> Fraction:
        """Sum of lines in ``category`` (optionally one token)."""
        category = Category(category)
        return sum((l.amount for _, l in self.lines()
                    if l.category is category and (token is None or l.token == token)), Fraction(0))

    def by_category(self) -> dict[Category, Fraction]:
        out: dict[Category, Fraction] = {}
        for _, line in self.lines():
            out[line.category] = out.get(line.category, Fraction(0)) + line.amount
        return out

    def to_text(self) -> str:
        width = 34
        rows = [self.holder, "-" * (width + 16)]
        for title, lines, total in (("Assets", self.assets, self.total_assets),
                                    ("Liabilities", self.liabilities, self.total_liabilities),
                                    ("Net Positions", self.net, self.total_net)):
            rows.append(title)
            for line in lines:
                name = LABELS[line.category] + (f" - {line.token}" if line.token else "")
                if line.counterparty:
                    name += f" ({line.counterparty})"
                rows.append(f"  {name:<{width}}{float(line.amount):>14,.2f}")
            rows.append(f"  {'Total ' + title:<{width}}{float(total):>14,.2f}")
        return "\n".join(rows)

    def csv_rows(self) -> list[list[str]]:
        return [[self.holder, section, line.category.value, line.token, line.counterparty,
                 repr(float(line.amount))] for section, line in self.lines()]


CSV_HEADER = ["holder", "section", "category", "token", "counterparty", "amount"]


def _section(category: Category) -> str:
    if category in ASSETS:
        return "assets"
    if category in LIABILITIES:
        return "liabilities"
    return "net"


def _sheet(holder: str, items: Mapping[tuple[Category, str, str], Fraction], offsets=(),
           include_zero: bool = False) -> BalanceSheet:
    sections: dict[str, list[SheetLine]] = {"assets": [], "liabilities": [], "net": []}
    order = {c: i for i, c in enumerate(ASSETS + LIABILITIES + NET)}
    for (cat, token, cp), amount in sorted(items.items(), key=lambda kv: (order[kv[0][0]], kv[0][1:])):
        if amount == 0 and not include_zero:
            continue
        sections[_section(cat)].append(SheetLine(cat, token, amount, cp))
    return BalanceSheet(holder, tuple(sections["assets"]), tuple(sections["liabilities"]),
                        tuple(sections["net"]), tuple(offsets))


def balance_sheet(ledger: Ledger, holder: str, include_zero: bool = False) -> BalanceSheet:
    if holder not in ledger.holders:
        raise UnknownHolderError(f"no accounts for holder {holder!r}")
    items: dict[tuple[Category, str, str], Fraction] = {}
    for key, bal in ledger.balances(include_zero=True).items():
        if key.holder != holder:
            continue
        cat = Category(key.category)
        # statement amounts: assets are debit balances, the rest credit balances
        items[(cat, key.token, key.counterparty)] = bal if cat in ASSETS else -bal
    return _sheet(holder, items, ledger.offsets(holder), include_zero)


def balance_sheets(ledger: Ledger) -> dict[str, BalanceSheet]:
    return {h: balance_sheet(ledger, h) for h in ledger.holders}


def consolidate(sheets: Iterable[BalanceSheet], holder: str = "consolidated",
                fold_new_money: bool = True) -> BalanceSheet:
    """Combine protocol sheets into one, removing what one owes another.

    First each sheet's own offsets are removed.  Then Value Locked in token
    ``t`` at one holder is matched against Payables in ``t`` at a different
    holder (holders in order, overlapping amount only).  New Money is
    reported as Payables unless ``fold_new_money`` is false.
    """
    sheets = list(sheets)
    remaining: dict[tuple[str, Category, str, str], Fraction] = {}
    for sh in sheets:
        for _, line in sh.lines():
            key = (sh.holder, line.category, line.token, line.counterparty)
            remaining[key] = remaining.get(key, Fraction(0)) + line.amount
        for asset, liability, amount in sh.offsets:
            remaining[(sh.holder, Category(asset.category), asset.token, asset.counterparty)] -= amount
            remaining[(sh.holder, Category(liability.category), liability.token, liability.counterparty)] -= amount

    locked = [k for k in remaining if k[1] is VL]
    payables = [k for k in remaining if k[1] is PAY]
    for a in locked:
        for p in payables:
            if a[0] == p[0] or a[2] != p[2]:
                continue
            amount = min(remaining[a], remaining[p])
            if amount > 0:
                remaining[a] -= amount
                remaining[p] -= amount

    items: dict[tuple[Category, str, str], Fraction] = {}
    for (_, cat, token, cp), amount in remaining.items():
        if fold_new_money and cat is NM:
            cat = PAY
        items[(cat, token, cp)] = items.get((cat, token, cp), Fraction(0)) + amount
    return _sheet(holder, items)


def protocol_tvr(user_sheets: Iterable[BalanceSheet], protocol: str) -> Fraction:
    """Receivables minus payables that users hold against ``protocol``."""
    total = Fraction(0)
    for sh in user_sheets:
        for _, line in sh.lines():
            if line.counterparty != protocol:
                continue
            if line.category is REC:
                total += line.amount
            elif line.category is PAY:
                total -= line.amount
    return total


# -- scripts ---------------------------------------------------------------------


@dataclass
class Replay:
    ledger: Ledger
    checkpoints: dict[str, dict[str, BalanceSheet]]


def parse_script(text: str) -> list[dict]:
    """JSON Lines; blank lines and lines starting with ``#`` are skipped."""
    records = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rec = json.loads(line, parse_float=Fraction)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", f"line {n}") from None
        if not isinstance(rec, dict):
            raise SchemaError("each record must be an object", f"line {n}")
        records.append(rec)
    return records


def replay(records: Iterable[Mapping], ledger: Ledger | None = None) -> Replay:
    """Run transaction records; ``{"checkpoint": label}`` snapshots all sheets."""
    ledger = Ledger() if ledger is None else ledger
    checkpoints: dict[str, dict[str, BalanceSheet]] = {}
    for i, rec in enumerate(records):
        rec = dict(rec)
        if "checkpoint" in rec:
            checkpoints[str(rec["checkpoint"])] = balance_sheets(ledger)
            continue
        if "holders" in rec:
            for h in rec["holders"]:
                ledger.register(h)
            continue
        try:
            template = rec.pop("template")
            holder = rec.pop("holder")
        except KeyError as exc:
            raise SchemaError(f"missing field {exc.args[0]}", f"record {i}") from None
        try:
            ledger.record(Transaction(template, holder, rec))
        except SchemaError as exc:
            raise SchemaError(str(exc), f"record {i}") from None
    return Replay(ledger, checkpoints)


def replay_text(text: str) -> Replay:
    return replay(parse_script(text))


def sheets_csv(sheets: Iterable[BalanceSheet]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for sh in sheets:
        writer.writerows(sh.csv_rows())
    return buf.getvalue()
