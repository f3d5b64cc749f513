#!/usr/bin/env python3
"""Generate the bundled daily-cases fixtures.

Writes src/seqcast/data/india_states_daily.csv (twelve major states) and
india_national_daily.csv (region "India" = the states plus a synthetic
remainder for the smaller states/territories).  The series are synthetic but
historically shaped: March 2020 monthly totals for the ranked states are
pinned to the published figures, the first wave peaks in September 2020, the
much larger second wave peaks in early May 2021, Delhi shows several distinct
peaks, and Kerala stays elevated through late 2021.  Day-of-week reporting
texture and multiplicative noise ride on top of the wave shapes.

Deterministic: every draw comes from the package Rng with a fixed seed, so
re-running the script reproduces the committed CSVs byte for byte.
"""

from __future__ import annotations

import datetime as dt
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from seqcast.numerics import Rng  # noqa: E402

FIRST_DAY = dt.date(2020, 3, 1)
LAST_DAY = dt.date(2021, 9, 27)
SEED = 20210927
NOISE_SIGMA = 0.11
# Monday..Sunday reporting factors (weekend dip), mean 1.
WEEKLY = [0.95, 1.04, 1.06, 1.05, 1.02, 0.98, 0.90]

# March 2020 monthly totals (novel cases) for the ranking fixture.
MARCH_TOTALS = {
    "Maharashtra": 302, "Kerala": 241, "Tamil Nadu": 234, "Delhi": 152,
    "Uttar Pradesh": 103, "Karnataka": 101, "Telengana": 96, "Rajasthan": 93,
    "Andhra Pradesh": 83, "Gujarat": 82, "Madhya Pradesh": 66, "Haryana": 43,
}

# Wave mix per region: baseline plus (peak, peak date, rise sigma, fall sigma)
# bumps, all in cases/day.
WAVES = {
    "Maharashtra": (400, [(22000, "2020-09-12", 55, 48),
                          (7000, "2021-02-20", 18, 14),
                          (62000, "2021-04-17", 22, 26)]),
    "Kerala": (300, [(9000, "2020-10-10", 45, 55),
                     (32000, "2021-05-12", 20, 28),
                     (30000, "2021-08-25", 30, 70)]),
    "Tamil Nadu": (250, [(6000, "2020-08-01", 45, 60),
                         (33000, "2021-05-20", 22, 30)]),
    "Delhi": (150, [(3800, "2020-06-20", 25, 25),
                    (4300, "2020-09-15", 22, 22),
                    (7800, "2020-11-12", 22, 20),
                    (26000, "2021-04-22", 14, 14)]),
    "Uttar Pradesh": (200, [(6800, "2020-09-12", 40, 45),
                            (35000, "2021-04-24", 14, 16)]),
    "Karnataka": (200, [(9800, "2020-10-01", 45, 40),
                        (44000, "2021-05-05", 18, 22)]),
    "Telengana": (100, [(2800, "2020-08-25", 40, 55),
                        (12000, "2021-05-10", 20, 25)]),
    "Rajasthan": (100, [(3300, "2020-11-20", 50, 35),
                        (16000, "2021-05-07", 16, 16)]),
    "Andhra Pradesh": (150, [(10500, "2020-09-01", 30, 40),
                             (20000, "2021-05-15", 20, 30)]),
    "Gujarat": (120, [(1500, "2020-11-25", 55, 35),
                      (13000, "2021-04-28", 15, 15)]),
    "Madhya Pradesh": (100, [(1800, "2020-09-20", 40, 40),
                             (12000, "2021-04-25", 16, 14)]),
    "Haryana": (80, [(3100, "2020-11-15", 45, 30),
                     (14000, "2021-05-03", 15, 14)]),
    # Remainder of the country (only feeds the national aggregate).
    "_rest": (2500, [(26000, "2020-09-15", 55, 55),
                     (112000, "2021-05-06", 22, 28),
                     (9000, "2021-08-30", 35, 65)]),
}


def _bump(day_index: float, peak: float, mu: float, s_rise: float,
          s_fall: float) -> float:
    sigma = s_rise if day_index < mu else s_fall
    return peak * math.exp(-0.5 * ((day_index - mu) / sigma) ** 2)


def _normal(rng: Rng) -> float:
    u1 = max(rng.random(), 1e-300)
    u2 = rng.random()
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def _march_ramp(total: int) -> list[int]:
    """31 integers ramping exponentially and summing exactly to `total`."""
    weights = [math.exp(0.12 * d) for d in range(31)]
    scale = total / sum(weights)
    real = [w * scale for w in weights]
    ints = [math.floor(v) for v in real]
    short = total - sum(ints)
    remainders = sorted(range(31), key=lambda i: real[i] - ints[i], reverse=True)
    for i in remainders[:short]:
        ints[i] += 1
    return ints


def build_region(name: str, rng: Rng) -> list[int]:
    base, bumps = WAVES[name]
    bumps = [(peak, (dt.date.fromisoformat(day) - FIRST_DAY).days, sr, sf)
             for peak, day, sr, sf in bumps]
    n_days = (LAST_DAY - FIRST_DAY).days + 1
    values: list[int] = []
    if name in MARCH_TOTALS:
        values.extend(_march_ramp(MARCH_TOTALS[name]))
        start = 31
    else:
        start = 0
    for d in range(start, n_days):
        level = base + sum(_bump(d, *b) for b in bumps)
        date = FIRST_DAY + dt.timedelta(days=d)
        factor = WEEKLY[date.weekday()]
        noise = math.exp(NOISE_SIGMA * _normal(rng) - 0.5 * NOISE_SIGMA ** 2)
        values.append(max(0, round(level * factor * noise)))
    return values


def main() -> None:
    out_dir = Path(__file__).resolve().parent.parent / "src" / "seqcast" / "data"
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = Rng(SEED)
    regions = {name: build_region(name, rng) for name in sorted(WAVES)}

    dates = [(FIRST_DAY + dt.timedelta(days=d)).isoformat()
             for d in range((LAST_DAY - FIRST_DAY).days + 1)]

    states = out_dir / "india_states_daily.csv"
    with states.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("date,region,new_cases\n")
        for name in sorted(MARCH_TOTALS):
            for day, value in zip(dates, regions[name]):
                fh.write(f"{day},{name},{value}\n")
    print(f"wrote {states}")

    national = out_dir / "india_national_daily.csv"
    with national.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("date,region,new_cases\n")
        for i, day in enumerate(dates):
            total = sum(regions[name][i] for name in WAVES)
            fh.write(f"{day},India,{total}\n")
    print(f"wrote {national}")


if __name__ == "__main__":
    main()
