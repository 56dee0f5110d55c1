from fractions import Fraction
from importlib import resources

import pytest
from hypothesis import given, strategies as st

from defitvr.exceptions import SchemaError, UnbalancedEntryError, UnknownHolderError, UnknownTemplateError
from defitvr.ledger import (
    CASH,
    INIT,
    NM,
    PAY,
    REC,
    TEMPLATES,
    VL,
    AccountKey,
    JournalEntry,
    Ledger,
    Transaction,
    balance_sheet,
    consolidate,
    journalize,
    parse_script,
    post,
    protocol_tvr,
    replay_text,
    sheets_csv,
)


def script(name):
    return (resources.files("defitvr") / "data" / name).read_text(encoding="utf-8")


@pytest.fixture(scope="module")
def wrapping():
    return replay_text(script("wrapping.jsonl"))


@pytest.fixture(scope="module")
def leveraging():
    return replay_text(script("leveraging.jsonl"))


def lines(sheet):
    return {(line.category, line.token): line.amount for _, line in sheet.lines()}


STAKE = Transaction("stake", "Lido", {"token": "ETH", "receipt": "stETH", "quantity": 1, "price": 1000})

SAMPLE_PARAMS = {
    "stake": {"token": "ETH", "receipt": "stETH", "quantity": 2, "price": 10},
    "burn": {"token": "ETH", "receipt": "stETH", "quantity": 1, "price": 10},
    "cdp_borrow": {"collateral": "ETH", "collateral_quantity": 1, "collateral_price": 10,
                   "stablecoin": "DAI", "minted": 5},
    "stability_fee": {"stablecoin": "DAI", "accrued": 1},
    "cdp_repay": {"stablecoin": "DAI", "repaid": 5, "collateral": "ETH", "withdrawn": 1, "collateral_price": 10},
    "appreciation": {"token": "ETH", "quantity": 1, "price_change": 3},
    "depreciation": {"token": "ETH", "quantity": 1, "price_change": 3},
    "liquidation_penalty": {"stablecoin": "DAI", "debt": 5, "penalty": Fraction(13, 100)},
    "cdp_liquidation": {"stablecoin": "DAI", "debt": 5, "collateral": "ETH", "collateral_quantity": 1,
                        "collateral_price": 7, "accrued": 1, "penalty": Fraction(13, 100)},
    "lending_supply": {"token": "DAI", "receipt": "aDAI", "quantity": 100, "price": 1},
    "lending_borrow": {"token": "ETH", "debt_token": "dETH", "quantity": 2, "price": 10},
    "debt_interest": {"token": "ETH", "debt_token": "dETH", "accrued": 1, "price": 10},
    "lending_repay": {"token": "ETH", "debt_token": "dETH", "quantity": 1, "price": 10},
    "lending_liquidation": {"token": "ETH", "debt_token": "dETH", "collateral": "DAI", "receipt": "aDAI",
                            "debt": 2, "price": 10, "close_factor": Fraction(1, 2),
                            "bonus": Fraction(5, 100), "accrued": 1},
    "lp_provide": {"token_a": "ETH", "quantity_a": 1, "price_a": 10, "token_b": "DAI", "quantity_b": 10,
                   "price_b": 1, "lp_token": "LP"},
    "lp_remove": {"token_a": "ETH", "quantity_a": 1, "price_a": 10, "token_b": "DAI", "quantity_b": 10,
                  "price_b": 1, "lp_token": "LP"},
    "swap": {"token_in": "ETH", "token_out": "DAI", "quantity": 1, "price": 10},
    "user_fund": {"token": "ETH", "quantity": 1, "price": 10},
    "user_deposit": {"token": "ETH", "receipt": "stETH", "quantity": 1, "price": 10, "protocol": "Lido"},
    "user_withdraw": {"token": "ETH", "receipt": "stETH", "quantity": 1, "price": 10, "protocol": "Lido"},
    "user_wrap": {"receipt": "stETH", "wrapped": "wstETH", "quantity": 1, "price": 10, "protocol": "Lido"},
    "user_borrow": {"token": "ETH", "debt_token": "dETH", "quantity": 1, "price": 10, "protocol": "Aave"},
    "user_repay": {"token": "ETH", "debt_token": "dETH", "quantity": 1, "price": 10, "protocol": "Aave"},
    "user_swap": {"token_in": "ETH", "token_out": "DAI", "quantity": 1, "price": 10},
}


class TestJournalize:
    def test_staking_entry(self):
        entry = journalize(STAKE)
        assert entry.debits == ((AccountKey("Lido", VL, "ETH"), 1000),)
        assert entry.credits == ((AccountKey("Lido", PAY, "stETH"), 1000),)

    def test_cdp_borrowing_four_lines(self):
        entry = journalize(Transaction("cdp_borrow", "MakerDAO", {
            "collateral": "wstETH", "collateral_quantity": 1, "collateral_price": 1000,
            "stablecoin": "DAI", "minted": 571}))
        assert dict(entry.debits) == {AccountKey("MakerDAO", REC, "DAI"): 571,
                                      AccountKey("MakerDAO", VL, "wstETH"): 1000}
        assert dict(entry.credits) == {AccountKey("MakerDAO", NM, "DAI"): 571,
                                       AccountKey("MakerDAO", PAY, "wstETH"): 1000}

    @pytest.mark.parametrize("template", sorted(TEMPLATES))
    def test_every_template_balances(self, template):
        assert template in SAMPLE_PARAMS
        entry = journalize(Transaction(template, "H", SAMPLE_PARAMS[template]))
        assert entry.balanced and entry.total_debits > 0

    @pytest.mark.parametrize("template", sorted(TEMPLATES))
    def test_zero_quantity_gives_zero_entry(self, template):
        params = {k: (0 if k in ("quantity", "quantity_a", "quantity_b", "minted", "collateral_quantity",
                                 "repaid", "withdrawn", "accrued", "debt") else v)
                  for k, v in SAMPLE_PARAMS[template].items()}
        entry = journalize(Transaction(template, "H", params))
        assert entry.balanced and entry.total_debits == 0

    def test_cdp_liquidation_settlement_amounts(self):
        entry = journalize(Transaction("cdp_liquidation", "M", SAMPLE_PARAMS["cdp_liquidation"]))
        # debt 5, fee 1, penalty 13% of 6: receivable cleared is 1.13 * 6
        assert dict(entry.credits)[AccountKey("M", REC, "DAI")] == Fraction(678, 100)

    def test_unknown_template(self):
        with pytest.raises(UnknownTemplateError):
            journalize(Transaction("flash_loan", "Aave", {}))

    def test_negative_quantity(self):
        with pytest.raises(SchemaError):
            journalize(Transaction("stake", "Lido", {**STAKE.params, "quantity": -1}))

    def test_missing_parameter(self):
        with pytest.raises(SchemaError):
            journalize(Transaction("stake", "Lido", {"token": "ETH"}))


class TestPost:
    def test_single_stake(self):
        led = Ledger()
        led.record(STAKE)
        assert led.balance(AccountKey("Lido", VL, "ETH")) == 1000
        assert led.balance(AccountKey("Lido", PAY, "stETH")) == -1000

    def test_reverse_restores(self):
        led = Ledger()
        entry = journalize(STAKE)
        post(led, entry)
        before = led.balances(include_zero=True)
        post(led, entry)
        post(led, entry.reversed())
        assert led.balances(include_zero=True) == before
        assert len(led.entries) == 3

    def test_unbalanced_rejected(self):
        bad = JournalEntry("bad", ((AccountKey("X", VL, "ETH"), Fraction(1)),),
                           ((AccountKey("X", PAY, "ETH"), Fraction(2)),))
        with pytest.raises(UnbalancedEntryError):
            Ledger().post(bad)


class TestWrappingScenario:
    def test_lido_sheet(self, wrapping):
        for step in ("step2", "step4"):
            sheet = wrapping.checkpoints[step]["Lido"]
            assert lines(sheet) == {(VL, "stETH"): 1000, (PAY, "wstETH"): 1000}
            assert sheet.total_assets == sheet.total_liabilities == 1000

    def test_makerdao_sheet(self, wrapping):
        assert lines(wrapping.checkpoints["step2"]["MakerDAO"]) == {}
        sheet = wrapping.checkpoints["step4"]["MakerDAO"]
        assert lines(sheet) == {(VL, "wstETH"): 1000, (REC, "DAI"): 571, (PAY, "wstETH"): 1000, (NM, "DAI"): 571}
        assert sheet.total_assets == sheet.total_liabilities == 1571

    def test_consolidated(self, wrapping):
        for step, totals in (("step2", 1000), ("step4", 1571)):
            sheets = wrapping.checkpoints[step]
            merged = consolidate([sheets["Lido"], sheets["MakerDAO"]])
            cats = merged.by_category()
            assert cats[VL] == 1000
            assert cats.get(REC, 0) == totals - 1000
            assert cats[PAY] == totals
            assert merged.total_assets == merged.total_liabilities == totals

    def test_lido_user(self, wrapping):
        s2 = wrapping.checkpoints["step2"]["lido-user"]
        s4 = wrapping.checkpoints["step4"]["lido-user"]
        assert lines(s2) == {(REC, "stETH"): 1000, (INIT, "ETH"): 1000}
        assert lines(s4) == {(REC, "wstETH"): 1000, (INIT, "ETH"): 1000}
        assert protocol_tvr([s4], "Lido") == 1000

    def test_user_and_protocol_holders(self, wrapping):
        assert wrapping.ledger.user_holders == ("lido-user",)
        assert wrapping.ledger.protocol_holders == ("Lido", "MakerDAO")


class TestLeveragingScenario:
    def test_aave_sheet(self, leveraging):
        s3 = leveraging.checkpoints["step3"]["Aave"]
        s5 = leveraging.checkpoints["step5"]["Aave"]
        # the lent-out ETH leaves VL-ETH at zero, which the sheet omits
        assert lines(s3) == {(VL, "DAI"): 2000, (REC, "dETH"): 900, (PAY, "aDAI"): 2000, (PAY, "aETH"): 900}
        assert s3.total_assets == 2900
        assert lines(s5) == {(VL, "DAI"): 2900, (REC, "dETH"): 900, (PAY, "aDAI"): 2900, (PAY, "aETH"): 900}
        assert s5.total_assets == s5.total_liabilities == 3800

    def test_uniswap_sheet(self, leveraging):
        s3 = leveraging.checkpoints["step3"]["Uniswap"]
        s5 = leveraging.checkpoints["step5"]["Uniswap"]
        assert lines(s3) == {(VL, "ETH"): 1800, (VL, "DAI"): 1800, (PAY, "ETH-DAI-LP"): 3600}
        assert lines(s5) == {(VL, "ETH"): 2700, (VL, "DAI"): 900, (PAY, "ETH-DAI-LP"): 3600}

    def test_consolidated_vs_naive(self, leveraging):
        for step in ("step3", "step5"):
            sheets = leveraging.checkpoints[step]
            merged = consolidate([sheets["Aave"], sheets["Uniswap"]])
            assert merged.by_category() == {VL: 5600, PAY: 5600}
        naive = sum(sh.amount(VL) for h, sh in leveraging.checkpoints["step5"].items() if h != "aave-user")
        assert naive == 6500

    def test_aave_user(self, leveraging):
        s0 = leveraging.checkpoints["step0"]["aave-user"]
        s3 = leveraging.checkpoints["step3"]["aave-user"]
        s5 = leveraging.checkpoints["step5"]["aave-user"]
        assert lines(s0) == {(CASH, "DAI"): 2000, (INIT, "DAI"): 2000}
        assert s3.amount(CASH, "ETH") == 900 and s3.amount(REC, "aDAI") == 2000 and s3.amount(PAY, "dETH") == 900
        assert s5.amount(REC) == 2900 and s5.total_liabilities == 900
        assert s5.total_assets == s5.total_liabilities + s5.total_net
        assert protocol_tvr([s5], "Aave") == 2000

    def test_offsets_recorded(self, leveraging):
        offsets = leveraging.checkpoints["step5"]["Aave"].offsets
        assert sorted(amount for _, _, amount in offsets) == [900, 900]


class TestSheets:
    def test_registered_holder_without_entries(self):
        sheet = balance_sheet(Ledger(["Lido"]), "Lido")
        assert sheet.total_assets == sheet.total_liabilities == sheet.total_net == 0

    def test_unknown_holder(self):
        with pytest.raises(UnknownHolderError):
            balance_sheet(Ledger(), "Lido")

    def test_single_sheet_consolidates_to_itself(self):
        led = Ledger()
        led.record(STAKE)
        sheet = balance_sheet(led, "Lido")
        merged = consolidate([sheet])
        assert lines(merged) == lines(sheet)

    def test_fully_leveraged_user_contributes_nothing(self):
        led = Ledger()
        led.record(Transaction("user_borrow", "u", {"token": "DAI", "debt_token": "dDAI", "quantity": 5,
                                                     "price": 1, "protocol": "Aave"}))
        led.record(Transaction("user_deposit", "u", {"token": "DAI", "receipt": "aDAI", "quantity": 5,
                                                      "price": 1, "protocol": "Aave"}))
        assert protocol_tvr([balance_sheet(led, "u")], "Aave") == 0

    def test_text_and_csv(self, wrapping):
        sheet = wrapping.checkpoints["step4"]["MakerDAO"]
        text = sheet.to_text()
        assert "New Money - DAI" in text and "1,571.00" in text
        csv_text = sheets_csv([sheet])
        assert csv_text.splitlines()[0] == "holder,section,category,token,counterparty,amount"
        assert len(csv_text.splitlines()) == 5


class TestScripts:
    def test_comments_and_blank_lines(self):
        assert parse_script("# c\n\n{\"checkpoint\": \"a\"}\n") == [{"checkpoint": "a"}]

    def test_bad_json_names_line(self):
        with pytest.raises(SchemaError, match="line 2"):
            parse_script("{}\n{oops\n")

    def test_decimal_amounts_are_exact(self):
        recs = parse_script('{"template": "stake", "holder": "L", "token": "T", "receipt": "R",'
                            ' "quantity": 0.1, "price": 0.2}')
        assert recs[0]["quantity"] == Fraction(1, 10)

    def test_missing_template_field(self):
        with pytest.raises(SchemaError, match="record 0"):
            replay_text('{"holder": "x"}')


amounts = st.fractions(min_value=0, max_value=10_000, max_denominator=100)
tx = st.one_of(
    st.builds(lambda q, p, h: Transaction("stake", h, {"token": "ETH", "receipt": "stETH", "quantity": q, "price": p}),
              amounts, amounts, st.sampled_from(["A", "B"])),
    st.builds(lambda q, p, h: Transaction("lending_supply", h, {"token": "stETH", "receipt": "aSt", "quantity": q,
                                                               "price": p}),
              amounts, amounts, st.sampled_from(["A", "B"])),
    st.builds(lambda q, m, h: Transaction("cdp_borrow", h, {"collateral": "stETH", "collateral_quantity": q,
                                                           "collateral_price": 1, "stablecoin": "DAI", "minted": m}),
              amounts, amounts, st.sampled_from(["A", "B"])),
    st.builds(lambda q, h: Transaction("lending_borrow", h, {"token": "stETH", "debt_token": "dSt", "quantity": q,
                                                            "price": 1}),
              amounts, st.sampled_from(["A", "B"])),
    st.builds(lambda q, h: Transaction("swap", h, {"token_in": "ETH", "token_out": "DAI", "quantity": q, "price": 1}),
              amounts, st.sampled_from(["A", "B"])),
)


@given(st.lists(tx, max_size=12))
def test_sheets_always_balance(transactions):
    led = Ledger(["A", "B"])
    for t in transactions:
        assert led.record(t).balanced
    sheets = [balance_sheet(led, h) for h in ("A", "B")]
    for sh in sheets:
        assert sh.balanced
    merged = consolidate(sheets)
    assert merged.balanced
    assert merged.total_assets <= sum(sh.total_assets for sh in sheets)


@given(st.lists(amounts, max_size=6), st.lists(amounts, max_size=6))
def test_consolidation_is_plain_sum_without_cross_pairs(a, b):
    led = Ledger(["A", "B"])
    for q in a:
        led.record(Transaction("stake", "A", {"token": "ETH", "receipt": "stETH", "quantity": q, "price": 1}))
    for q in b:
        led.record(Transaction("stake", "B", {"token": "USDC", "receipt": "aUSDC", "quantity": q, "price": 1}))
    sheets = [balance_sheet(led, "A"), balance_sheet(led, "B")]
    merged = consolidate(sheets)
    assert merged.total_assets == sum(sh.total_assets for sh in sheets)
