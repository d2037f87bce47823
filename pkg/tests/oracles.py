"""Independent re-implementations used to cross-check the package.

Written from the definitions with plain Python loops and scipy quadrature,
sharing no code with ``langgame``.
"""
import math
from itertools import combinations

from scipy.integrate import quad

TOL = 1e-12
FLOOR = 1e-4


def _pdf(x, mean, std):
    return math.exp(-0.5 * ((x - mean) / std) ** 2) / (std * math.sqrt(2 * math.pi))


def hellinger_by_quadrature(a, b):
    """1 - Hellinger distance, with the Bhattacharyya coefficient integrated numerically."""
    (ma, sa), (mb, sb) = a, b
    lo = min(ma - 12 * sa, mb - 12 * sb)
    hi = max(ma + 12 * sa, mb + 12 * sb)
    bc, _ = quad(lambda x: math.sqrt(_pdf(x, ma, sa) * _pdf(x, mb, sb)), lo, hi,
                 points=sorted({ma, mb}), limit=500, epsabs=1e-13, epsrel=1e-13)
    return 1.0 - math.sqrt(max(0.0, 1.0 - bc))


def batch_stats(xs):
    n = len(xs)
    mean = math.fsum(xs) / n
    return mean, math.fsum((x - mean) ** 2 for x in xs) / n


def entity_similarity(channels, x, slope=0.5):
    """Weighted mean of exp(-|z|) over shared channels.

    ``channels`` maps channel -> (mean, std, weight_logit).
    """
    shared = [c for c in channels if c in x]
    if not shared:
        return None
    num = den = 0.0
    for c in shared:
        mean, std, logit = channels[c]
        w = 1.0 / (1.0 + math.exp(-slope * logit))
        num += w * math.exp(-abs(x[c] - mean) / max(std, FLOOR))
        den += w
    return num / den


def candidate_set(words, scene, topic, slope=0.5):
    """Indices of words whose similarity to the topic beats every other entity."""
    out = []
    for i, channels in enumerate(words):
        sims = [entity_similarity(channels, e, slope) for e in scene]
        if sims[topic] is None:
            continue
        if all(sims[topic] > s for j, s in enumerate(sims) if j != topic):
            out.append(i)
    return out


def brute_force_subset(cs, topic, shared):
    """Exhaustive search over channel subsets with uniform weights.

    Subsets must contain every channel where the topic is strictly the most
    similar entity. Ties go to fewer channels, then lexicographic order.
    """
    n = len(cs)
    shared = [int(j) for j in shared]
    positive = [j for j in shared
                if all(cs[topic][j] > cs[e][j] for e in range(n) if e != topic)]
    scored = []
    for r in range(1, len(shared) + 1):
        for subset in combinations(shared, r):
            if not set(positive) <= set(subset):
                continue
            means = [sum(cs[e][j] for j in subset) / r for e in range(n)]
            dp = means[topic] - max(m for e, m in enumerate(means) if e != topic)
            scored.append((dp, subset))
    best = max(dp for dp, _ in scored)
    ties = [s for dp, s in scored if dp >= best - TOL]
    return min(ties, key=lambda s: (len(s), s))
