"""Independent reference for TPE scoring on discrete spaces.

Uses scipy.stats.truncnorm and per-value loops rather than the package's
vectorized estimator, so the two routes share only the rule set.
"""

import math

from scipy.stats import truncnorm

from mahpo.search_space import Categorical, Integer


def split(observations, gamma):
    n = len(observations)
    n_good = min(n, math.ceil(gamma * n))
    # stable by arrival on ties
    ranked = sorted(enumerate(observations), key=lambda p: (-p[1][1], p[0]))
    good = [cfg for _, (cfg, _) in ranked[:n_good]]
    bad = [cfg for _, (cfg, _) in ranked[n_good:]]
    return good, bad


def integer_mass(dom: Integer, centers, x):
    low, high = dom.low - 0.5, dom.high + 0.5
    n = len(centers)
    total = (1.0 / (dom.high - dom.low + 1))  # uniform prior component
    if n:
        mus = sorted(float(c) for c in centers)
        floor = (high - low) / min(100, n)
        for i, mu in enumerate(mus):
            left = mu - (mus[i - 1] if i > 0 else low)
            right = (mus[i + 1] if i < n - 1 else high) - mu
            sigma = max(left, right, floor)
            dist = truncnorm((low - mu) / sigma, (high - mu) / sigma, loc=mu, scale=sigma)
            a, b = max(x - 0.5, low), min(x + 0.5, high)
            total += dist.cdf(b) - dist.cdf(a)
    return total / (n + 1)


def categorical_mass(dom: Categorical, values, x):
    return (sum(1 for v in values if v == x) + 1) / (len(values) + len(dom.choices))


def log_density(space, configs, x):
    total = 0.0
    for name, dom in space.params.items():
        values = [c.values[name] for c in configs]
        if isinstance(dom, Categorical):
            total += math.log(categorical_mass(dom, values, x.values[name]))
        else:
            total += math.log(integer_mass(dom, values, x.values[name]))
    return total


def score(space, observations, gamma, x):
    good, bad = split(observations, gamma)
    return log_density(space, good, x) - log_density(space, bad, x)
