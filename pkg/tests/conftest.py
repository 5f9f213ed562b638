import numpy as np
import pytest

from subgoals.percept import Percept
from subgoals.regions import (POSITIVE, NEGATIVE, LabeledPoint, PointStore,
                              RegionModel)


def make_percept(values):
    return Percept(*[float(v) for v in values])


def uniform_in_box(rng, lo, hi, n):
    """n points uniform in the axis-aligned box [lo_i, hi_i]^10."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return rng.uniform(lo, hi, size=(n, 10))


def uniform_outside_box(rng, lo, hi, n):
    """n points uniform in [0,1]^10 but outside the box (rejection sampling)."""
    out = []
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    while len(out) < n:
        cand = rng.uniform(0.0, 1.0, size=(4 * n, 10))
        inside = np.all((cand >= lo) & (cand <= hi), axis=1)
        out.extend(cand[~inside][: n - len(out)])
    return np.asarray(out)


def train_box_model(lo, hi, seed=0, n=200, hidden=(32, 16), sessions=2):
    """Classifier trained to activate inside the box: n positives vs n
    negatives, a couple of standard training sessions."""
    rng = np.random.Generator(np.random.Philox(seed))
    pos = uniform_in_box(rng, lo, hi, n)
    neg = uniform_outside_box(rng, lo, hi, n)
    X = np.vstack([pos, neg])
    y = np.array([1.0] * n + [0.0] * n)
    model = RegionModel(seed + 1, hidden=hidden)
    for _ in range(sessions):
        model.train_session(X, y, rng)
    return model


def fill_store(points, labels, start_step=0):
    store = PointStore()
    for i, (p, lab) in enumerate(zip(points, labels)):
        store.add_point(LabeledPoint(make_percept(p), lab, start_step + i))
    return store
