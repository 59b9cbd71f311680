"""Deterministic synthetic minute-bar dataset with a liquidity-spike regime.

A factor model with persistent stochastic volatility drives correlated
minute returns; dollar volumes follow an independent lognormal process on
which a two-state regime occasionally fires large spikes concentrated in a
few minutes.  Spikes are decoupled from returns by construction, so they
distort the volume shares that the liquidity adjustment keys on without
moving prices, which is exactly the kind of day the jump/diffusion measures
are built to flag.

Everything is generated from one seed; identical seeds give byte-identical
CSV output.
"""

from __future__ import annotations

import csv
import datetime as dt

import numpy as np

BASE_DATE = dt.date(2020, 1, 1)


def synthetic_minute_rows(
    n_assets: int = 8,
    n_days: int = 600,
    minutes_per_day: int = 48,
    seed: int = 7,
):
    """Yield (timestamp_iso, symbol, close, dollar_volume) rows, sorted by
    symbol then time."""
    rng = np.random.default_rng(seed)
    symbols = [f"A{i:02d}" for i in range(n_assets)]
    base_price = 10.0 * np.exp(rng.uniform(0.0, 3.0, n_assets))
    base_volume = 1e6 * np.exp(rng.uniform(-1.0, 1.0, n_assets))

    sigma_minute = 0.002
    factor_weight = 0.45
    logvol = np.zeros(n_assets)

    # two-state spike regime: calm vs spiky, persistent
    spike_prob = {0: 0.10, 1: 0.85}
    regime = 0

    closes = np.empty((n_days, minutes_per_day, n_assets))
    volumes = np.empty((n_days, minutes_per_day, n_assets))
    price = base_price.copy()
    for d in range(n_days):
        if rng.random() < 0.03:
            regime = 1 - regime
        logvol = 0.97 * logvol + 0.25 * rng.standard_normal(n_assets)
        day_vol = sigma_minute * np.exp(logvol - 0.25**2 / (2 * (1 - 0.97**2)))
        common = rng.standard_normal(minutes_per_day)
        idio = rng.standard_normal((minutes_per_day, n_assets))
        shocks = (
            np.sqrt(factor_weight) * common[:, None]
            + np.sqrt(1.0 - factor_weight) * idio
        )
        rets = day_vol[None, :] * shocks

        vol = base_volume[None, :] * np.exp(0.6 * rng.standard_normal((minutes_per_day, n_assets)))
        if rng.random() < spike_prob[regime]:
            n_spikes = 1 + rng.poisson(2)
            spike_minutes = rng.choice(minutes_per_day, size=min(n_spikes, minutes_per_day), replace=False)
            spike_assets = rng.random(n_assets) < 0.8
            boost = np.exp(rng.uniform(3.0, 4.5))
            vol[np.ix_(spike_minutes, np.where(spike_assets)[0])] *= boost

        for m in range(minutes_per_day):
            price = price * (1.0 + rets[m])
            closes[d, m] = price
        volumes[d] = vol

    for i, symbol in enumerate(symbols):
        for d in range(n_days):
            day = BASE_DATE + dt.timedelta(days=d)
            for m in range(minutes_per_day):
                ts = dt.datetime.combine(day, dt.time(0, 0), tzinfo=dt.timezone.utc)
                ts += dt.timedelta(minutes=m)
                yield (
                    ts.strftime("%Y-%m-%dT%H:%M:%SZ"),
                    symbol,
                    repr(float(closes[d, m, i])),
                    repr(float(volumes[d, m, i])),
                )


def write_synthetic_csv(
    path,
    n_assets: int = 8,
    n_days: int = 600,
    minutes_per_day: int = 48,
    seed: int = 7,
) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "symbol", "close", "dollar_volume"])
        for row in synthetic_minute_rows(n_assets, n_days, minutes_per_day, seed):
            writer.writerow(list(row))
