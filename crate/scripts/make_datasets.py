"""Writes the bundled benchmark CSVs (features..., label; no header)."""
import os

import numpy as np
import statsmodels.api as sm
from sklearn import datasets

OUT = os.path.join(os.path.dirname(__file__), "..", "data")
RNG = np.random.default_rng(20210601)


def write(name, x, y):
    path = os.path.join(OUT, name + ".csv")
    with open(path, "w", newline="\n") as f:
        for row, label in zip(x, y):
            f.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")
    print(name, x.shape, sorted(set(int(v) for v in y)))


def subsample(x, y, n):
    idx = np.sort(RNG.choice(len(y), size=n, replace=False))
    return x[idx], y[idx]


for loader, name in [
    (datasets.load_iris, "iris"),
    (datasets.load_wine, "wine"),
    (datasets.load_breast_cancer, "breast-cancer"),
]:
    x, y = loader(return_X_y=True)
    write(name, x, y)

# 8x8 digit images pooled to 4x4 (T = 16)
x, y = datasets.load_digits(return_X_y=True)
x = x.reshape(-1, 4, 2, 4, 2).mean(axis=(2, 4)).reshape(-1, 16)
write("digits-4x4", *subsample(x, y, 600))

anes = sm.datasets.anes96.load_pandas().data
y = anes["vote"].to_numpy()
x = anes.drop(columns=["vote", "logpopul"]).to_numpy()
write("anes96-vote", *subsample(x, y, 500))
