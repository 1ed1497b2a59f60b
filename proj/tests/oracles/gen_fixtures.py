#!/usr/bin/env python3
"""Regenerates the frozen oracle fixtures under tests/fixtures/.

Reference values come from statsmodels and vaderSentiment, run on seeded
inputs that are stored alongside the expected outputs so the C++ tests read
exactly the same numbers. Requires: numpy, statsmodels, vaderSentiment.
"""
import json
import os
import random

import numpy as np
from statsmodels.stats.diagnostic import acorr_ljungbox, het_arch
from statsmodels.tsa.stattools import adfuller
from vaderSentiment.vaderSentiment import SentimentIntensityAnalyzer

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "fixtures")


def adf_case(name, x, maxlag):
    stat, p, usedlag, nobs, crit, _ = adfuller(x, maxlag=maxlag, regression="c", autolag="AIC")
    return {"name": name, "series": list(map(float, x)), "max_lag": maxlag,
            "statistic": float(stat), "p_value": float(p), "lags_used": int(usedlag),
            "nobs": int(nobs), "crit_5pct": float(crit["5%"])}


def portmanteau_case(name, x, lags):
    bp = acorr_ljungbox(x, lags=[lags], boxpierce=True)
    return {"name": name, "series": list(map(float, x)), "lags": lags,
            "bp_stat": float(bp["bp_stat"].iloc[0]), "bp_pvalue": float(bp["bp_pvalue"].iloc[0]),
            "lb_stat": float(bp["lb_stat"].iloc[0]), "lb_pvalue": float(bp["lb_pvalue"].iloc[0])}


def arch_case(name, x, lags):
    lm, p, _, _ = het_arch(np.asarray(x), nlags=lags)
    return {"name": name, "series": list(map(float, x)), "lags": lags,
            "statistic": float(lm), "p_value": float(p)}


def simulate_garch(rng, n, a0, a1, b1):
    out = np.empty(n)
    s2 = a0 / (1 - a1 - b1)
    prev_a2 = s2
    for t in range(n):
        s2 = a0 + a1 * prev_a2 + b1 * s2
        out[t] = np.sqrt(s2) * rng.standard_normal()
        prev_a2 = out[t] ** 2
    return out


def timeseries_fixtures():
    rng = np.random.default_rng(20070102)
    walk = np.cumsum(rng.standard_normal(500)) + 60.0
    noise = rng.standard_normal(500)
    ar = np.zeros(300)
    e = rng.standard_normal(300)
    for t in range(1, 300):
        ar[t] = 0.9 * ar[t - 1] + e[t]
    adf = [adf_case("random_walk", walk, 17),
           adf_case("white_noise", noise, 17),
           adf_case("ar1_0.9", ar, 4)]
    iid = rng.standard_normal(1000)
    ar9 = np.zeros(500)
    e = rng.standard_normal(500)
    for t in range(1, 500):
        ar9[t] = 0.9 * ar9[t - 1] + e[t]
    port = [portmanteau_case("iid", iid, 10), portmanteau_case("ar1_0.9", ar9, 10)]
    garch = simulate_garch(rng, 2000, 0.1, 0.15, 0.80)
    arch = [arch_case("garch11", garch, 5), arch_case("iid", rng.standard_normal(2000), 5)]
    with open(os.path.join(OUT, "timeseries_oracle.json"), "w") as f:
        json.dump({"adf": adf, "portmanteau": port, "arch": arch}, f)


def dm_reference(la, lb, h):
    d = np.asarray(la) - np.asarray(lb)
    n = len(d)
    dbar = d.mean()
    gam = [np.sum((d[k:] - dbar) * (d[:n - k] - dbar)) / n for k in range(h)]
    v = (gam[0] + 2 * sum(gam[1:])) / n
    from scipy.stats import norm
    stat = dbar / np.sqrt(v)
    return float(stat), float(2 * norm.sf(abs(stat)))


def dm_fixtures():
    rng = np.random.default_rng(1995)
    eb = rng.standard_normal(500)
    lb = eb ** 2
    la = 0.5 * lb
    cases = []
    for h in (1, 3):
        s, p = dm_reference(la, lb, h)
        cases.append({"losses_a": la.tolist(), "losses_b": lb.tolist(), "horizon": h,
                      "statistic": s, "p_value": p})
    e1 = rng.standard_normal(200)
    e2 = e1 + 0.3 * rng.standard_normal(200)
    s, p = dm_reference(e1 ** 2, e2 ** 2, 2)
    cases.append({"losses_a": (e1 ** 2).tolist(), "losses_b": (e2 ** 2).tolist(), "horizon": 2,
                  "statistic": s, "p_value": p})
    with open(os.path.join(OUT, "dm_oracle.json"), "w") as f:
        json.dump(cases, f)


SUBJECTS = ["Crude oil", "Brent crude", "WTI futures", "OPEC", "The energy market", "Oil traders",
            "Shale producers", "Refiners", "Analysts", "Saudi Arabia", "Russia", "The IEA report",
            "Gasoline demand", "US inventories", "Tanker rates"]
POS_WORDS = ["gains", "strong", "optimism", "boost", "good", "great", "hope", "benefit", "growth",
             "confident", "improve", "win", "support", "stable", "success", "profit"]
NEG_WORDS = ["fears", "crisis", "war", "conflict", "losses", "weak", "panic", "attack", "killed",
             "worst", "lower", "cut", "shortage", "disruption", "strike", "threat", "risk", "decline",
             "collapse", "uncertainty"]
NEUTRAL = ["prices", "barrels", "output", "the market", "supply", "exports", "trading", "the session",
           "the pipeline", "production", "demand", "stockpiles"]
BOOSTERS = ["very", "extremely", "slightly", "hardly", "really", "somewhat", "deeply", "barely"]
NEGATORS = ["not", "never", "didn't", "without", "isn't", "cannot"]
VERBS = ["reported", "signalled", "showed", "faced", "saw", "expected", "described", "warned of"]


def make_sentence(r):
    kind = r.randrange(10)
    subj = r.choice(SUBJECTS)
    verb = r.choice(VERBS)
    noun = r.choice(NEUTRAL)

    def senti():
        w = r.choice(POS_WORDS if r.random() < 0.5 else NEG_WORDS)
        if r.random() < 0.3:
            w = r.choice(BOOSTERS) + " " + w
        if r.random() < 0.2:
            w = r.choice(NEGATORS) + " " + w
        return w

    if kind == 0:
        s = f"{subj} {verb} {senti()} {noun} on Tuesday."
    elif kind == 1:
        s = f"{subj} {verb} {senti()} {noun}, but {r.choice(NEUTRAL)} {r.choice(VERBS)} {senti()} signs."
    elif kind == 2:
        s = f"{subj} {verb} {senti().upper()} {noun} as {senti()} news spread"
        s += "!" * r.randint(1, 5)
    elif kind == 3:
        s = f"Is {noun} facing {senti()} pressure?? {subj} {verb} {senti()} moves."
    elif kind == 4:
        s = f"{subj} {verb} {noun} at ${r.randint(20, 120)}.{r.randint(10, 99)} a barrel."
    elif kind == 5:
        s = f"{subj} {verb} kind of {senti()} {noun} and {senti()} outlook."
    elif kind == 6:
        s = f"At least {noun} {verb} no {senti()} {r.choice(NEUTRAL)}."
    elif kind == 7:
        s = f"{subj} {verb} {senti()} and {senti()} {noun} with {senti()} expectations."
    elif kind == 8:
        s = f"{subj.upper()} {verb.upper()} {senti()} {noun.upper()} amid {senti()} talks."
    else:
        s = f"{subj} {verb} {senti()} {noun}; {r.choice(NEUTRAL)} remained {senti()} despite {senti()} data."
    return s


TABLE2 = [
    "Crude oil on the New York Mercantile Exchange dropped to $54.40 during early afternoon trading, "
    "marking a fifth day of lower oil prices.",
    "Mining shares moved higher on hopes for more Chinese stimulus to boost the country’s economy, "
    "with Rio Tinto rising 6.5p to 2873.5p and BHP Billiton 9p better at 1404.5p.",
    "In 2011, during Barack Obama’s first term in office, the US surpassed Russia as the world’s "
    "largest natural gas producer, and in early 2018 it overtook Saudi Arabia as the leading producer "
    "of crude oil.",
]


def sentiment_fixtures():
    r = random.Random(7514)
    sia = SentimentIntensityAnalyzer()
    sentences = TABLE2 + ["GOOD!!", "good", "", "The oil deal is good but the outlook is bad."]
    seen = set(sentences)
    while len(sentences) < 200:
        s = make_sentence(r)
        if s not in seen:
            seen.add(s)
            sentences.append(s)
    with open(os.path.join(OUT, "sentiment_200.tsv"), "w", encoding="utf-8") as f:
        f.write("text\tneg\tneu\tpos\tcompound\n")
        for s in sentences:
            sc = sia.polarity_scores(s)
            f.write(f"{s}\t{sc['neg']}\t{sc['neu']}\t{sc['pos']}\t{sc['compound']}\n")


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    timeseries_fixtures()
    dm_fixtures()
    sentiment_fixtures()
