"""Small reference systems and a seeded synthetic system for stress runs."""

from __future__ import annotations

import numpy as np

from .protocols import Position, Protocol, ProtocolKind
from .snapshot import Snapshot
from .tokens import Token, TokenKind

P, D, S = TokenKind.PLAIN, TokenKind.DERIVATIVE, TokenKind.CDP_STABLECOIN
CDP, LENDING, PASSIVE = ProtocolKind.CDP, ProtocolKind.LENDING, ProtocolKind.PASSIVE

ETH_PRICE = 4075.03


def wrapping_chain(eth_price: float = 1000.0, eth: float = 1.0, minted: float = 571.0) -> Snapshot:
    """ETH staked in Lido, wrapped, locked in a vault; the DAI minted then
    goes through Aave, Curve and Convex.  Uniswap V2 is listed but empty."""
    tokens = [
        Token("ETH", P),
        Token("stETH", D, eth, (("ETH", eth),)),
        Token("wstETH", D, eth, (("stETH", eth),)),
        Token("DAI", S, minted, (("wstETH", eth),), peg=1.0),
        Token("aDAI", D, minted, (("DAI", minted),)),
        Token("a3CRV", D, minted, (("aDAI", minted),)),
        Token("cvxa3CRV", D, minted, (("a3CRV", minted),)),
    ]
    protocols = [
        Protocol("Lido", PASSIVE),
        Protocol("MakerDAO", CDP, close_factor=1.0, liquidation_thresholds={"wstETH": 0.625}),
        Protocol("Aave", LENDING, close_factor=0.5, liquidation_bonus=0.05,
                 liquidation_thresholds={"DAI": 0.77}),
        Protocol("Curve", PASSIVE),
        Protocol("Convex", PASSIVE),
        Protocol("UniswapV2", PASSIVE),
    ]
    stakes = [
        ("Lido", "ETH", eth),
        ("Lido", "stETH", eth),
        ("MakerDAO", "wstETH", eth),
        ("Aave", "DAI", minted),
        ("Curve", "aDAI", minted),
        ("Convex", "a3CRV", minted),
    ]
    positions = [Position("vault-1", "MakerDAO", {"wstETH": eth}, {"DAI": minted})]
    return Snapshot.build(tokens, protocols, stakes, positions, {"ETH": eth_price})


def overcollateralized_stablecoin(ratio: float = 2.0, supply: float = 1000.0, eth_price: float = 1.0) -> Snapshot:
    """A stablecoin backed by ``ratio`` times its supply in ETH, with no open vaults."""
    eth = ratio * supply / eth_price
    tokens = [
        Token("ETH", P),
        Token("USDX", S, supply, (("ETH", eth),), peg=1.0),
        Token("aUSDX", D, supply, (("USDX", supply),)),
    ]
    protocols = [
        Protocol("Vaults", CDP, liquidation_thresholds={"ETH": 0.5}),
        Protocol("Lender", LENDING, liquidation_bonus=0.05, liquidation_thresholds={"USDX": 0.8}),
    ]
    stakes = [("Vaults", "ETH", eth), ("Lender", "USDX", supply)]
    return Snapshot.build(tokens, protocols, stakes, [], {"ETH": eth_price})


def synthetic_system(seed: int = 7, n_vaults: int = 120, n_loans: int = 80,
                     eth_price: float = ETH_PRICE) -> Snapshot:
    """The wrapping-chain topology at realistic size, with random PLF positions.

    Maker vaults lock wstETH or ETH against DAI; a peg-stability reserve of
    USDC backs half of the DAI supply.  Aave loans are ETH against USDC or
    wstETH against DAI, and some borrowed USDC is redeposited in Uniswap.
    Every position starts with a health factor of at least 1.02.
    """
    rng = np.random.default_rng(seed)
    alpha_vault = {"wstETH": 0.625, "ETH": 0.69}
    alpha_aave = {"ETH": 0.825, "wstETH": 0.8, "DAI": 0.77, "USDC": 0.875}

    vaults = []
    for i in range(n_vaults):
        coll = "wstETH" if i % 2 == 0 else "ETH"
        qty = float(np.round(rng.lognormal(np.log(1500.0), 0.6), 4))
        h0 = float(rng.uniform(1.02, 2.6))
        debt = float(np.round(qty * eth_price * alpha_vault[coll] / h0, 2))
        vaults.append(Position(f"vault-{i:03d}", "MakerDAO", {coll: qty}, {"DAI": debt}))

    loans = []
    redeposited_usdc = 0.0
    for i in range(n_loans):
        if i % 2 == 0:
            coll, debt_tok = "ETH", "USDC"
        else:
            coll, debt_tok = "wstETH", "DAI"
        qty = float(np.round(rng.lognormal(np.log(800.0), 0.7), 4))
        h0 = float(rng.uniform(1.02, 2.2))
        debt = float(np.round(qty * eth_price * alpha_aave[coll] / h0, 2))
        redeposits = ()
        if debt_tok == "USDC" and i % 4 == 0:
            r = float(np.round(debt / 2, 2))
            redeposits = (("UniswapV2", "USDC", r),)
            redeposited_usdc += r
        loans.append(Position(f"loan-{i:03d}", "Aave", {coll: qty}, {debt_tok: debt}, redeposits))

    def locked(positions, token):
        return float(sum(p.collateral.get(token, 0.0) for p in positions))

    vault_debt = float(sum(p.debt["DAI"] for p in vaults))
    psm = float(np.round(vault_debt, 2))
    dai_supply = vault_debt + psm
    maker_wst, maker_eth = locked(vaults, "wstETH"), locked(vaults, "ETH")
    aave_wst, aave_eth = locked(loans, "wstETH"), locked(loans, "ETH")

    lido_eth = 2_000_000.0
    wst_supply = 900_000.0
    aave_eth_total = aave_eth + 150_000.0
    aave_dai = float(np.round(0.3 * dai_supply, 2))
    aave_usdc = 2.0e9
    curve_adai = float(np.round(0.5 * aave_dai, 2))
    curve_ausdc = 1.0e9
    a3crv = curve_adai + curve_ausdc
    convex_a3crv = float(np.round(0.6 * a3crv, 2))
    uni_eth = 120_000.0
    uni_usdc = float(np.round(uni_eth * eth_price, 2)) + redeposited_usdc

    tokens = [
        Token("ETH", P),
        Token("USDC", P),
        Token("stETH", D, lido_eth, (("ETH", lido_eth),)),
        Token("wstETH", D, wst_supply, (("stETH", wst_supply),)),
        Token("DAI", S, dai_supply, (("wstETH", maker_wst), ("ETH", maker_eth), ("USDC", psm)), peg=1.0),
        Token("aDAI", D, aave_dai, (("DAI", aave_dai),)),
        Token("aUSDC", D, aave_usdc, (("USDC", aave_usdc),)),
        Token("aETH", D, aave_eth_total, (("ETH", aave_eth_total),)),
        Token("a3CRV", D, a3crv, (("aDAI", curve_adai), ("aUSDC", curve_ausdc))),
        Token("cvxa3CRV", D, convex_a3crv, (("a3CRV", convex_a3crv),)),
    ]
    protocols = [
        Protocol("Lido", PASSIVE),
        Protocol("MakerDAO", CDP, close_factor=1.0, liquidation_thresholds=alpha_vault),
        Protocol("Aave", LENDING, close_factor=0.5, liquidation_bonus=0.05, liquidation_thresholds=alpha_aave),
        Protocol("Curve", PASSIVE),
        Protocol("Convex", PASSIVE),
        Protocol("UniswapV2", PASSIVE),
    ]
    stakes = [
        ("Lido", "ETH", lido_eth),
        ("Lido", "stETH", wst_supply),
        ("MakerDAO", "wstETH", maker_wst),
        ("MakerDAO", "ETH", maker_eth),
        ("MakerDAO", "USDC", psm),
        ("Aave", "ETH", aave_eth_total),
        ("Aave", "wstETH", aave_wst),
        ("Aave", "DAI", aave_dai),
        ("Aave", "USDC", aave_usdc),
        ("Curve", "aDAI", curve_adai),
        ("Curve", "aUSDC", curve_ausdc),
        ("Convex", "a3CRV", convex_a3crv),
        ("UniswapV2", "ETH", uni_eth),
        ("UniswapV2", "USDC", uni_usdc),
    ]
    return Snapshot.build(tokens, protocols, stakes, vaults + loans, {"ETH": eth_price, "USDC": 1.0})


def synthetic_series(seed: int = 11, days: int = 120, start: str = "2022-01-01"):
    """Daily ETH price, TVL, TVR and a stablecoin supply driven by one random walk.

    TVL loads on ETH more heavily than TVR does, as leverage would make it.
    Stablecoin supply moves independently.  One TVR value is left missing.
    """
    import pandas as pd

    rng = np.random.default_rng(seed)
    eth_ret = rng.normal(0.0, 0.04, days)
    eth = 3000.0 * np.exp(np.cumsum(eth_ret))
    tvr = 4.0e10 * np.exp(np.cumsum(0.8 * eth_ret + rng.normal(0.0, 0.01, days)))
    tvl = 1.0e11 * np.exp(np.cumsum(1.3 * eth_ret + rng.normal(0.0, 0.01, days)))
    stable = 1.5e11 * np.exp(np.cumsum(rng.normal(0.0, 0.005, days)))
    frame = pd.DataFrame({
        "date": pd.date_range(start, periods=days, freq="D").strftime("%Y-%m-%d"),
        "eth_usd": np.round(eth, 2),
        "tvl": np.round(tvl, 0),
        "tvr": np.round(tvr, 0),
        "stablecoin_supply": np.round(stable, 0),
    })
    frame.loc[days // 2, "tvr"] = np.nan
    return frame
