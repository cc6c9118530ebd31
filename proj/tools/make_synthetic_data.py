#!/usr/bin/env python3
"""Regenerate data/synthetic_prices.csv and data/synthetic_riskfree.csv.

Daily closes for ten stocks and a market index on weekdays from 2013-01-02
to 2023-08-31, drawn from a single-factor model with a fixed seed, plus a
monthly series of annual fixed-deposit rates whose monthly average is
0.002139918.
"""

import argparse
import datetime as dt
from pathlib import Path

import numpy as np

TICKERS = ["INAR", "CELC", "AXIA", "HLCB", "HLBB", "IHHH", "HTHB", "GENM", "DIAL", "GENT"]
MARKET = "KLCI"
TARGET_MONTHLY_RF = 0.002139918


def weekdays(start, end):
    day = start
    while day <= end:
        if day.weekday() < 5:
            yield day
        day += dt.timedelta(days=1)


def prices(rng):
    days = list(weekdays(dt.date(2013, 1, 2), dt.date(2023, 8, 31)))
    n = len(days)
    market = rng.normal(0.00005, 0.0075, n)
    beta = np.array([1.25, 0.85, 1.05, 0.70, 0.55, 0.60, 0.95, 1.15, 1.10, 0.90])
    alpha = np.array([0.0006, 0.0000, -0.0002, 0.0002, 0.0003, 0.0004, 0.0001, -0.0001, 0.0003, -0.0002])
    idio = np.array([0.022, 0.017, 0.020, 0.012, 0.010, 0.013, 0.018, 0.016, 0.019, 0.014])
    noise = rng.normal(0.0, 1.0, (n, len(TICKERS))) * idio
    log_ret = alpha + np.outer(market, beta) + noise
    start = np.array([2.10, 3.45, 1.80, 17.20, 14.60, 5.90, 2.30, 3.10, 4.70, 7.80])
    stocks = start * np.exp(np.cumsum(log_ret, axis=0))
    index = 1680.0 * np.exp(np.cumsum(market))
    return days, np.column_stack([stocks, index])


def riskfree(rng):
    months = [(y, m) for y in range(2013, 2024) for m in range(1, 13) if (y, m) <= (2023, 8)]
    base = np.interp(np.arange(len(months)), [0, 36, 84, 96, 110, len(months) - 1], [3.05, 3.10, 2.95, 1.75, 1.85, 2.70])
    annual = (base + rng.normal(0.0, 0.03, len(months))) / 100.0
    annual *= 12.0 * TARGET_MONTHLY_RF / annual.mean()
    return months, annual


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data")
    parser.add_argument("--seed", type=int, default=20230831)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)

    days, closes = prices(rng)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "synthetic_prices.csv", "w", newline="\n") as f:
        f.write("date," + ",".join(TICKERS + [MARKET]) + "\n")
        for day, row in zip(days, closes):
            f.write(day.isoformat() + "," + ",".join(f"{p:.4f}" for p in row) + "\n")

    months, annual = riskfree(rng)
    with open(args.out / "synthetic_riskfree.csv", "w", newline="\n") as f:
        f.write("month,annual_rate\n")
        for (y, m), a in zip(months, annual):
            f.write(f"{y:04d}-{m:02d},{a:.12f}\n")


if __name__ == "__main__":
    main()
