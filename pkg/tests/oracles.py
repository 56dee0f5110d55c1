"""Independent reference implementations used only by the tests.

Written from the formulas directly with plain Python loops; none of them
import the package's numerical code.
"""

import math


def average_ranks(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman_rho(x, y):
    rx, ry = average_ranks(list(x)), average_ranks(list(y))
    n = len(rx)
    mx, my = sum(rx) / n, sum(ry) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    sxx = sum((a - mx) ** 2 for a in rx)
    syy = sum((b - my) ** 2 for b in ry)
    return sxy / math.sqrt(sxx * syy)


def health(collateral_value_weighted, debt_value):
    return math.inf if debt_value == 0 else collateral_value_weighted / debt_value


def lending_repay_value(vc, vd, close_factor, bonus):
    return min(vc / (1 + bonus), close_factor * vd)


def profit(kind, vc, vd, close_factor, bonus, gas):
    if kind == "cdp":
        return close_factor * (vc - vd) - gas
    return lending_repay_value(vc, vd, close_factor, bonus) * bonus - gas


def deltas(kind, collateral, debt, prices, close_factor, bonus):
    """Quantity changes per token: (collateral deltas, repaid-token deltas)."""
    vc = sum(q * prices[t] for t, q in collateral.items())
    vd = sum(q * prices[t] for t, q in debt.items())
    if kind == "cdp":
        return ({t: -close_factor * q for t, q in collateral.items()}, {t: 0.0 for t in debt})
    v = lending_repay_value(vc, vd, close_factor, bonus)
    return ({t: -(1 + bonus) * v * q / vc for t, q in collateral.items()},
            {t: v * q / vd for t, q in debt.items()})


def liquidable(h, pi):
    return h < 1 and pi > 0


def prices(tokens, plain):
    """tokens: id -> (kind, supply, [(underlying, qty)], peg)."""
    out = {}

    def price(tid):
        if tid in out:
            return out[tid]
        kind, supply, basket, peg = tokens[tid]
        if kind == "plain":
            out[tid] = plain[tid]
        else:
            gamma = sum(price(u) * q for u, q in basket) / supply
            out[tid] = peg if kind == "cdp_stablecoin" and gamma >= peg else gamma
        return out[tid]

    for tid in tokens:
        price(tid)
    return out


def tvl(stakes, price_map):
    return sum(q * price_map[t] for (_, t), q in stakes.items())


def tvr(stakes, redeposits, price_map, plain_ids):
    held = dict(stakes)
    for key, q in redeposits:
        held[key] = held.get(key, 0.0) - q
    return sum(max(q, 0.0) * price_map[t] for (_, t), q in held.items() if t in plain_ids)
