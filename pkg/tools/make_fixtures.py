#!/usr/bin/env python3
"""Regenerate the frozen daily OHLCV fixtures under fixtures/.

The series are synthetic but shaped like the 2019-2024 crypto market:
log-price follows piecewise-linear regime anchors with seeded AR(1)
noise on top, so they show realistic trends, drawdowns, and day-to-day
volatility while remaining fully reproducible offline.  A handful of
interior rows carry null price cells to exercise gap repair.

The checked-in CSVs are frozen; rerunning this script reproduces them
byte-for-byte.
"""

from __future__ import annotations

from datetime import date, timedelta
from pathlib import Path

import numpy as np

START = date(2019, 1, 1)
END = date(2024, 1, 1)

# (date, close) regime anchors per asset; log-price is interpolated between them
ANCHORS = {
    "BTC": [
        ("2019-01-01", 3843.52),
        ("2019-06-26", 12910.0),
        ("2020-03-16", 5030.0),
        ("2020-12-31", 29020.0),
        ("2021-04-14", 63110.0),
        ("2021-07-20", 29800.0),
        ("2021-11-09", 67530.0),
        ("2022-06-18", 19020.0),
        ("2022-11-21", 15790.0),
        ("2023-04-10", 29650.0),
        ("2023-09-11", 25160.0),
        ("2024-01-01", 42280.0),
    ],
    "ETH": [
        ("2019-01-01", 133.42),
        ("2019-06-26", 310.0),
        ("2020-03-16", 111.0),
        ("2020-12-31", 737.0),
        ("2021-05-11", 4170.0),
        ("2021-07-20", 1786.0),
        ("2021-11-09", 4810.0),
        ("2022-06-18", 995.0),
        ("2022-11-21", 1110.0),
        ("2023-04-13", 2010.0),
        ("2023-10-11", 1570.0),
        ("2024-01-01", 2282.0),
    ],
    "LTC": [
        ("2019-01-01", 30.46),
        ("2019-06-22", 141.0),
        ("2020-03-16", 30.8),
        ("2020-12-31", 124.0),
        ("2021-05-10", 386.0),
        ("2021-07-20", 107.0),
        ("2021-11-09", 270.0),
        ("2022-06-18", 41.3),
        ("2022-11-21", 59.1),
        ("2023-07-02", 111.0),
        ("2023-10-19", 62.4),
        ("2024-01-01", 73.2),
    ],
}

# daily AR(1) noise on log price: innovation scale and pullback
NOISE = {
    "BTC": {"sigma": 0.020, "phi": 0.97, "seed": 1311},
    "ETH": {"sigma": 0.024, "phi": 0.97, "seed": 1312},
    "LTC": {"sigma": 0.028, "phi": 0.97, "seed": 1313},
}

# interior dates whose price cells are written as null (Date/Volume kept)
MISSING = {
    "BTC": ["2019-04-17", "2020-08-03", "2021-02-14", "2022-10-01", "2023-06-09"],
    "ETH": ["2019-09-12", "2020-05-21", "2021-12-03", "2022-07-18", "2023-03-27"],
    "LTC": ["2019-11-08", "2020-02-29", "2021-08-15", "2022-04-22", "2023-09-30"],
}


def synth_closes(symbol: str) -> np.ndarray:
    n = (END - START).days + 1
    day_index = np.arange(n)
    anchor_days = []
    anchor_logs = []
    for iso, price in ANCHORS[symbol]:
        anchor_days.append((date.fromisoformat(iso) - START).days)
        anchor_logs.append(np.log(price))
    trend = np.interp(day_index, anchor_days, anchor_logs)

    spec = NOISE[symbol]
    rng = np.random.default_rng(spec["seed"])
    z = np.zeros(n)
    innovations = rng.normal(scale=spec["sigma"], size=n)
    for t in range(1, n):
        z[t] = spec["phi"] * z[t - 1] + innovations[t]
    closes = np.exp(trend + z)
    # keep the first close exactly on its anchor
    closes[0] = np.exp(anchor_logs[0])
    return np.round(closes, 2)


def write_fixture(symbol: str, out_dir: Path) -> Path:
    closes = synth_closes(symbol)
    n = closes.shape[0]
    rng = np.random.default_rng(NOISE[symbol]["seed"] + 7)
    wiggle = rng.uniform(0.0, 0.01, size=n)
    volume = rng.integers(10_000, 5_000_000, size=n)
    missing = {date.fromisoformat(d) for d in MISSING[symbol]}

    lines = ["Date,Open,High,Low,Close,Adj Close,Volume"]
    for k in range(n):
        day = START + timedelta(days=int(k))
        if day in missing:
            lines.append(f"{day.isoformat()},null,null,null,null,null,{volume[k]}")
            continue
        close = closes[k]
        open_ = closes[k - 1] if k > 0 else close
        high = round(max(open_, close) * (1.0 + wiggle[k]), 2)
        low = round(min(open_, close) * (1.0 - wiggle[k]), 2)
        lines.append(
            f"{day.isoformat()},{open_:.2f},{high:.2f},{low:.2f},{close:.2f},{close:.2f},{volume[k]}"
        )

    path = out_dir / f"{symbol.lower()}_usd.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


def main():
    out_dir = Path(__file__).resolve().parent.parent / "fixtures"
    out_dir.mkdir(exist_ok=True)
    for symbol in ANCHORS:
        path = write_fixture(symbol, out_dir)
        print(path)


if __name__ == "__main__":
    main()
