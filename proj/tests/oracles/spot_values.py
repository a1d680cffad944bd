"""Recompute the closed-form reference constants with scipy, independently of the C++ code."""

import math
import sys

import numpy as np
from scipy.spatial.distance import jensenshannon
from scipy.stats import multivariate_normal, norm


def kld(k, eps, delta):
    a = 2.0 / (9.0 * (k - 1))
    return math.floor((k - 1) / (2.0 * eps) * (1.0 - a + math.sqrt(a) * norm.ppf(1.0 - delta)))


def tfidf(query, docs):
    total = sum(query.values())
    score = 0.0
    for c, n in query.items():
        containing = sum(1 for d in docs if d.get(c, 0) > 0)
        score += n / total * math.log(len(docs) / containing)
    return score


checks = {
    "kld(2)": (kld(2, 0.05, 0.01), 18),
    "kld(10)": (kld(10, 0.05, 0.01), 120),
    "entropy(I3)": (multivariate_normal(np.zeros(3), np.eye(3)).entropy(), 4.2568),
    "entropy(e*I3)": (multivariate_normal(np.zeros(3), math.e * np.eye(3)).entropy(), 4.2568 + 1.5),
    "jsd": (jensenshannon([0.5, 0.5], [1.0, 0.0]) ** 2, 0.2158),
    "tfidf": (tfidf({0: 2, 1: 1}, [{0: 2, 1: 1}, {0: 1}, {2: 1}, {2: 1}]), 0.9242),
}

failed = False
for name, (got, want) in checks.items():
    ok = abs(got - want) <= 1e-4
    failed |= not ok
    print(f"{'ok  ' if ok else 'FAIL'} {name}: {got:.6f} expected {want}")
sys.exit(1 if failed else 0)
