"""Writes the two separable point sets used by the clustering acceptance test
and cross-checks the elbow choice with scikit-learn.

two_blobs.csv: 2 tight blobs, 10 points each, 5 dimensions.
three_blobs.csv: 3 tight blobs on orthogonal axes, 8 points each, 8
dimensions, rows normalized to unit length.
Each file has a `label` column (the planted blob) followed by coordinates.
"""

import pathlib

import numpy as np
from sklearn.cluster import KMeans

OUT = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "fixtures"


def blobs(rng, centers, per, sd, unit):
    rows, labels = [], []
    for c, center in enumerate(centers):
        pts = center + rng.normal(scale=sd, size=(per, len(center)))
        if unit:
            pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        rows.append(pts)
        labels += [c] * per
    return np.vstack(rows), np.array(labels)


def elbow(x, k_min, k_max):
    k_max = min(k_max, len(x) - 1)
    ks = list(range(k_min - 1, k_max + 2))
    inertia = {k: KMeans(k, n_init=20, random_state=0).fit(x).inertia_ for k in ks}
    span = max(inertia.values()) - min(inertia.values())
    score = {k: (inertia[k - 1] - 2 * inertia[k] + inertia[k + 1]) / span for k in range(k_min, k_max + 1)}
    return max(score, key=lambda k: (score[k], -k))


def write(name, x, labels):
    lines = ["label," + ",".join(f"x{i}" for i in range(x.shape[1]))]
    for lab, row in zip(labels, x):
        lines.append(f"{lab}," + ",".join(repr(float(v)) for v in row))
    (OUT / name).write_text("\n".join(lines) + "\n")


def main():
    rng = np.random.default_rng(20250101)
    two_c = np.array([[0.0] * 5, [3.0, 3.0, 0.0, 0.0, 0.0]])
    x2, l2 = blobs(rng, two_c, 10, 0.1, False)
    three_c = np.eye(8)[:3]
    x3, l3 = blobs(rng, three_c, 8, 0.03, True)
    write("two_blobs.csv", x2, l2)
    write("three_blobs.csv", x3, l3)
    print("two_blobs elbow k =", elbow(x2, 2, 4))
    print("three_blobs elbow k =", elbow(x3, 2, 4))


if __name__ == "__main__":
    main()
