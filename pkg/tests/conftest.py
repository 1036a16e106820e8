import numpy as np
import pytest

from stochastic_gronwall.bounds import GronwallPathBundle


def make_random_bundle(rng, horizon, with_slack=False):
    """Random bundle satisfying the recursion hypothesis.

    F is bounded below so that a bounded-increment martingale keeps
    F_n + M_n nonnegative; X is built by equality (optionally minus a
    nonnegative slack, clipped at zero, which preserves the hypothesis).
    """
    n = horizon
    f_min = rng.uniform(0.5, 5.0)
    f = f_min + rng.uniform(0.0, 5.0, n + 1)
    g = rng.uniform(0.0, 0.5, n + 1)
    inc_cap = f_min / max(n, 1)
    m = np.zeros(n + 1)
    m[1:] = np.cumsum(rng.uniform(-inc_cap, inc_cap, n))
    x = np.empty(n + 1)
    acc = 0.0
    for k in range(n + 1):
        rhs = f[k] + m[k] + acc
        slack = rng.uniform(0.0, 1.0) if with_slack else 0.0
        x[k] = max(0.0, rhs - slack)
        acc += g[k] * x[k] if k < n else 0.0
    return GronwallPathBundle(x, f, g, m)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
