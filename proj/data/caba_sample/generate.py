#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the frozen 15-commune sample (reports.csv, census.csv).

The series is synthetic: three epidemic waves split over the communes by
population, Poisson reporting noise, weekend under-reporting, deaths lagging
confirmed cases, one missing report date and a few downward corrections.
Output is fixed by the seed below; rerunning reproduces the committed files.
"""
import csv
import datetime as dt
import math
import random
from pathlib import Path

SEED = 20200401
START = dt.date(2020, 4, 1)
N_DAYS = 410
MISSING = dt.date(2020, 9, 15)
POPULATIONS = [205886, 157932, 187537, 218245, 179005, 176076, 220591, 187237,
               161797, 166022, 189832, 200116, 231331, 225970, 182574]
# (peak day, peak city-wide daily cases, width in days)
WAVES = [(125, 1100.0, 32.0), (265, 650.0, 28.0), (395, 1900.0, 26.0)]
DEATH_SHARE = 0.035
DEATH_LAG = 12
# (commune index, day, size of the downward correction)
CORRECTIONS = [(3, 150, 40), (9, 300, 25), (12, 360, 3)]


def city_rate(day):
    base = 18.0 * math.exp(day / 40.0) if day < 60 else 0.0
    return base + sum(a * math.exp(-0.5 * ((day - p) / w) ** 2) for p, a, w in WAVES)


def poisson(rng, mean):
    if mean <= 0.0:
        return 0
    if mean > 60.0:
        return max(0, round(rng.gauss(mean, math.sqrt(mean))))
    limit, k, prod = math.exp(-mean), 0, rng.random()
    while prod > limit:
        k += 1
        prod *= rng.random()
    return k


def main():
    rng = random.Random(SEED)
    out = Path(__file__).resolve().parent
    total = sum(POPULATIONS)
    shares = [p / total for p in POPULATIONS]
    # Commune-level heterogeneity in attack rates, fixed per commune.
    tilt = [rng.uniform(0.8, 1.2) for _ in POPULATIONS]

    n = len(POPULATIONS)
    conf = [[0] * n for _ in range(N_DAYS)]
    deaths = [[0] * n for _ in range(N_DAYS)]
    cum_c = [rng.randint(15, 35) for _ in range(n)]
    cum_d = [rng.randint(0, 1) for _ in range(n)]
    new_cases = [[0] * n for _ in range(N_DAYS)]
    for day in range(N_DAYS):
        date = START + dt.timedelta(days=day)
        weekday = date.weekday()
        report = 0.75 if weekday >= 5 else (1.25 if weekday == 0 else 1.0)
        for j in range(n):
            mean = city_rate(day) * shares[j] * tilt[j] * report
            new_cases[day][j] = poisson(rng, mean)
            cum_c[j] += new_cases[day][j]
            if day >= DEATH_LAG:
                cum_d[j] += poisson(rng, DEATH_SHARE * new_cases[day - DEATH_LAG][j])
            conf[day][j] = cum_c[j]
            deaths[day][j] = cum_d[j]
    # A correction drops the reported total below the previous day's.
    for j, day, size in CORRECTIONS:
        conf[day][j] = conf[day - 1][j] - size

    with open(out / "census.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["location_id", "name", "population"])
        for j, p in enumerate(POPULATIONS):
            w.writerow([j + 1, f"Comuna {j + 1}", p])

    with open(out / "reports.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["date", "location_id", "cum_confirmed", "cum_deaths"])
        for day in range(N_DAYS):
            date = START + dt.timedelta(days=day)
            if date == MISSING:
                continue
            for j in range(n):
                w.writerow([date.isoformat(), j + 1, conf[day][j], deaths[day][j]])


if __name__ == "__main__":
    main()
