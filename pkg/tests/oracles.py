"""Loop-based reference implementations of the prediction metrics."""

import math


def _cov(samples, t):
    m = len(samples)
    mx = sum(s[t][0] for s in samples) / m
    my = sum(s[t][1] for s in samples) / m
    sxx = sum((s[t][0] - mx) ** 2 for s in samples) / (m - 1)
    syy = sum((s[t][1] - my) ** 2 for s in samples) / (m - 1)
    sxy = sum((s[t][0] - mx) * (s[t][1] - my) for s in samples) / (m - 1)
    return sxx, sxy, syy


def ade(samples, truth):
    tot = 0.0
    for s in samples:
        for p, q in zip(s, truth):
            tot += math.hypot(p[0] - q[0], p[1] - q[1])
    return tot / (len(samples) * len(truth))


def fde(samples, truth):
    return sum(math.hypot(s[-1][0] - truth[-1][0], s[-1][1] - truth[-1][1]) for s in samples) / len(samples)


def amd(samples, truth, eps=1e-6):
    tot = 0.0
    for t in range(len(truth)):
        a, b, c = _cov(samples, t)
        a, c = a + eps, c + eps
        det = a * c - b * b
        inv = ((c / det, -b / det), (-b / det, a / det))
        for s in samples:
            dx, dy = s[t][0] - truth[t][0], s[t][1] - truth[t][1]
            q = dx * (inv[0][0] * dx + inv[0][1] * dy) + dy * (inv[1][0] * dx + inv[1][1] * dy)
            tot += math.sqrt(max(q, 0.0))
    return tot / (len(samples) * len(truth))


def amv(samples):
    tot = 0.0
    n = len(samples[0])
    for t in range(n):
        a, b, c = _cov(samples, t)
        tr, det = a + c, a * c - b * b
        tot += tr / 2 + math.sqrt(max(tr * tr / 4 - det, 0.0))
    return tot / n
