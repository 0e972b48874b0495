"""Independent recomputation of a run's metrics from its run directory.

Reads bundle.jsonl, re-splits sentences, loads vectors from
embeddings.cache/, re-clusters with scipy's Ward linkage at the report's k,
and recomputes every divergence with numpy/scipy. Prints a JSON object with
the recomputed values next to the stored ones.

usage: python3 tools/oracle.py RUN_DIR
"""

import hashlib
import json
import math
import pathlib
import re
import sys

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.optimize import linear_sum_assignment

EPS = 1e-6


def sentences(text):
    # The fixtures contain no abbreviations, so a plain split suffices.
    parts = re.split(r"(?<=[.!?])\s+(?=[A-Z])", " ".join(text.split()))
    return [p for p in parts if len(p) >= 2]


def load(run):
    lines = (run / "bundle.jsonl").read_text().splitlines()
    header = json.loads(lines[0])
    grid = [[None] * header["n"] for _ in range(header["m"])]
    for line in lines[1:]:
        rec = json.loads(line)
        grid[rec["m"]][rec["n"]] = rec["text"]
    return header["paraphrases"], grid


def embed(cache, texts):
    model = json.loads(next(cache.glob("*.json")).read_text())["model_id"]
    rows = []
    for t in texts:
        key = hashlib.sha256(model.encode() + b"\0" + t.encode()).hexdigest()
        rows.append(json.loads((cache / f"{key}.json").read_text())["vector"])
    x = np.array(rows, dtype=float)
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def dist(labels, k):
    c = np.bincount(labels, minlength=k).astype(float)
    return c / c.sum()


def H(p):
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def kl(p, q):
    z = 1 + len(p) * EPS
    a, b = (p + EPS) / z, (q + EPS) / z
    return float((a * np.log2(a / b)).sum())


def jsd(p, q):
    m = (p + q) / 2
    f = lambda x: float((x[x > 0] * np.log2(x[x > 0] / m[x > 0])).sum())
    return 0.5 * f(p) + 0.5 * f(q)


def cond_entropy(table):
    p = table / table.sum()
    return H(p.ravel()) - H(p.sum(axis=1))


def wasserstein(P, A):
    l = len(P) * len(A) // math.gcd(len(P), len(A))
    P2 = np.repeat(P, l // len(P), axis=0)
    A2 = np.repeat(A, l // len(A), axis=0)
    cost = np.linalg.norm(P2[:, None, :] - A2[None, :, :], axis=2)
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].mean())


def main(run):
    report = json.loads((run / "report.json").read_text())
    k = report["k"]
    paraphrases, grid = load(run)
    recs = [(m, "P", s) for m, p in enumerate(paraphrases) for s in sentences(p)]
    recs += [(m, "A", s) for m, row in enumerate(grid) for a in row for s in sentences(a)]
    X = embed(run / "embeddings.cache", [r[2] for r in recs])
    labels = fcluster(linkage(X, method="ward"), t=k, criterion="maxclust") - 1
    role = np.array([r[1] for r in recs])
    pair = np.array([r[0] for r in recs])

    P, Y = dist(labels[role == "P"], k), dist(labels[role == "A"], k)
    js, kls, conds = [], [], []
    for m in range(len(paraphrases)):
        lp = labels[(role == "P") & (pair == m)]
        la = labels[(role == "A") & (pair == m)]
        if len(lp) == 0 or len(la) == 0:
            continue
        pm, am = dist(lp, k), dist(la, k)
        js.append(jsd(pm, am))
        kls.append(kl(am, pm))
        conds.append(cond_entropy(np.outer(np.bincount(lp, minlength=k), np.bincount(la, minlength=k)).astype(float)))
    hp = H(P)
    w = wasserstein(X[role == "P"], X[role == "A"])
    ens_jsd, ens_kl = float(np.mean(js)), float(np.mean(kls))
    out = {
        "h_prompt": hp,
        "ensemble_jsd": ens_jsd,
        "ensemble_kl_ap": ens_kl,
        "ensemble_mi": H(Y) - float(np.mean(conds)),
        "wasserstein": w,
        "s_h": (0.7 * ens_jsd + 0.3 * w) / hp if hp > 0 else None,
        "kl_score": ens_kl / hp if hp > 0 else None,
    }
    print(json.dumps({"oracle": out, "stored": {key: report[key] for key in out}}, indent=2))


if __name__ == "__main__":
    main(pathlib.Path(sys.argv[1]))
