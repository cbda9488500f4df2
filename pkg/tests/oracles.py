"""Independent brute-force oracles used by the test suite.

These deliberately avoid the library's own code paths: the queue simulator
is a direct discrete-event loop, and the quadrature helpers call scipy on
raw closures.
"""

import numpy as np
from scipy import integrate


def average_queue_depth(limit_rate, market_rate, limit_size, market_size,
                        hazard, n_events=1_000_000, seed=1, burn_fraction=0.2):
    """Time-averaged total volume of a one-sided constant-rate book.

    Limit orders of a fixed size arrive at ``limit_rate``; market orders
    consume a fixed volume FIFO (partially filling the front order); every
    pending order is cancelled at ``hazard`` (memoryless, so the victim of
    the next cancellation is uniform among pending orders).
    """
    rng = np.random.default_rng(seed)
    sizes: list[float] = []
    total = 0.0
    t = 0.0
    acc = 0.0
    burn = int(n_events * burn_fraction)
    t0 = acc0 = 0.0
    for i in range(n_events):
        n = len(sizes)
        rate = limit_rate + market_rate + hazard * n
        dt = rng.exponential(1.0 / rate)
        acc += total * dt
        t += dt
        if i == burn:
            t0, acc0 = t, acc
        u = rng.random() * rate
        if u < limit_rate:
            sizes.append(limit_size)
            total += limit_size
        elif u < limit_rate + market_rate:
            want = market_size
            while want > 0 and sizes:
                if sizes[0] <= want:
                    want -= sizes[0]
                    total -= sizes[0]
                    sizes.pop(0)
                else:
                    sizes[0] -= want
                    total -= want
                    want = 0.0
        else:
            if n:
                k = int(rng.integers(n))
                total -= sizes[k]
                del sizes[k]
    return (acc - acc0) / (t - t0)


def quad_unit_interval(fn, tol=1e-12):
    """Adaptive quadrature of fn over [0, 1]."""
    value, _ = integrate.quad(fn, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=400)
    return value


def hyp2f1_partial_sums(a, b, c, z, n_terms):
    """First partial sums of the Gauss series, computed independently."""
    sums = np.empty(n_terms)
    term = 1.0
    total = 1.0
    sums[0] = total
    for k in range(1, n_terms):
        term *= (a + k - 1) * (b + k - 1) / ((c + k - 1) * k) * z
        total += term
        sums[k] = total
    return sums
