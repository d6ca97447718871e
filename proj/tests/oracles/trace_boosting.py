#!/usr/bin/env python3
"""Longhand trace of the transfer-boosting update rules on a four-sample
stump fixture. Prints every intermediate quantity frozen into
tests/unit/test_learn.cpp.

The fixture (1-D feature, depth-1 trees, 2 rounds, c_fn=1, c_fp=3):

  row 0  aux   x=0.10  label=stable    (id 1)
  row 1  aux   x=0.70  label=unstable  (id 2)
  row 2  same  x=0.50  label=unstable  (id 11)
  row 3  same  x=0.95  label=stable    (id 12)

Aux rows start at weight 1; same rows start proportional to their
misclassification cost (c_fp for unstable truth, c_fn for stable truth),
normalized to unit mean, so 3/2 and 1/2. All initial weights are dyadic, so
round-1 arithmetic is exact in IEEE754 and the remaining values are
reproducible bit for bit by replaying the same operation order.
"""

import math
from fractions import Fraction as Fr

X = [0.10, 0.70, 0.50, 0.95]
Y = [1, 0, 0, 1]
N_AUX = 2


def gini(w0, w1):
    t = w0 + w1
    if t <= 0:
        return 0.0
    p0 = w0 / t
    return 2.0 * p0 * (1.0 - p0)


def best_stump(p):
    """Weighted-Gini stump exactly as the trainer defines it: midpoint
    thresholds between adjacent distinct values, first best kept on ties."""
    order = sorted(range(4), key=lambda i: X[i])
    w0 = sum(p[i] for i in range(4) if Y[i] == 0)
    w1 = sum(p[i] for i in range(4) if Y[i] == 1)
    parent = gini(w0, w1)
    best = None
    l0 = l1 = 0.0
    prev = None
    for i in order:
        v = X[i]
        if prev is not None and v > prev and 0 < l0 + l1 < w0 + w1:
            thr = 0.5 * (prev + v)
            r0, r1 = w0 - l0, w1 - l1
            gain = parent - (l0 + l1) / (w0 + w1) * gini(l0, l1) - (r0 + r1) / (w0 + w1) * gini(r0, r1)
            if best is None or gain > best[0] + 1e-15:
                best = (gain, thr)
        if Y[i]:
            l1 += p[i]
        else:
            l0 += p[i]
        prev = v
    gain, thr = best
    left0 = sum(p[i] for i in range(4) if X[i] <= thr and Y[i] == 0)
    left1 = sum(p[i] for i in range(4) if X[i] <= thr and Y[i] == 1)
    right0 = sum(p[i] for i in range(4) if X[i] > thr and Y[i] == 0)
    right1 = sum(p[i] for i in range(4) if X[i] > thr and Y[i] == 1)
    left_class = 1 if left1 > left0 else 0
    right_class = 1 if right1 > right0 else 0
    return thr, gain, left_class, right_class


def trace():
    c_fn, c_fp = 1.0, 3.0
    w = [1.0, 1.0]
    same_costs = [c_fp if Y[i] == 0 else c_fn for i in (2, 3)]
    mean = sum(same_costs) / 2.0
    w += [c / mean for c in same_costs]
    print(f"w_init = {[repr(v) for v in w]}")

    betas = []
    for t in range(2):
        total = 0.0
        for v in w:  # left-to-right accumulate, as the implementation does
            total += v
        p = [v / total for v in w]
        print(f"round {t + 1}: total = {total!r}")
        print(f"round {t + 1}: p = {[repr(v) for v in p]}")
        thr, gain, lc, rc = best_stump(p)
        print(f"round {t + 1}: stump thr = {thr!r} gain = {gain!r} left={lc} right={rc}")
        pred = [lc if x <= thr else rc for x in X]
        print(f"round {t + 1}: pred = {pred}")
        err = 0.0
        mass = 0.0
        for i in (2, 3):
            mass += p[i]
            if pred[i] != Y[i]:
                err += p[i]
        eps = err / mass if mass > 0 else 0.0
        beta = max(eps / (1.0 - eps), 1e-10)
        betas.append(beta)
        print(f"round {t + 1}: eps = {eps!r} beta = {beta!r}")
        beta_src = 1.0 / (1.0 + math.sqrt(2.0 * math.log(2.0) / 2.0))
        for i in range(N_AUX):
            if pred[i] != Y[i]:
                w[i] *= beta_src
        for i in (2, 3):
            if pred[i] != Y[i]:
                w[i] /= beta
        print(f"round {t + 1}: w_after = {[repr(v) for v in w]}")

    print(f"beta_src(n_aux=2, N=2) = {1.0 / (1.0 + math.sqrt(2.0 * math.log(2.0) / 2.0))!r}")
    print(f"beta_src(n_aux=2, N=4) = {1.0 / (1.0 + math.sqrt(2.0 * math.log(2.0) / 4.0))!r}")
    # exact rational cross-check of the round-1 quantities
    p = [Fr(1, 4), Fr(1, 4), Fr(3, 8), Fr(1, 8)]
    assert p[3] / (p[2] + p[3]) == Fr(1, 4)
    print("round 1 eps exact = 1/4, beta exact = 1/3 (checked with rationals)")
    # committee arithmetic for the documented two-round vote example
    b = (0.2, 0.4)
    votes = (1, 0)
    lhs = sum(-math.log(bb) * h for bb, h in zip(b, votes))
    rhs = sum(-math.log(bb) * 0.5 for bb in b)
    print(f"vote lhs = {lhs!r} rhs = {rhs!r} -> {'stable' if lhs >= rhs else 'unstable'}")


if __name__ == "__main__":
    trace()
