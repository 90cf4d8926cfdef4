"""Channel-gain statistics, the proactive-dropping bound, and mean power.

With maximum-ratio transmission over n antennas the effective channel gain
is Gamma(n, 1) distributed.  Packets are dropped proactively whenever the
gain falls below a threshold g_th chosen so that a closed-form upper bound
F on the dropping probability equals the dropping budget.  The same
threshold yields the average transmit power of the channel-inversion policy
in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.integrate import quad
from scipy.special import gammainc

from .model import SystemConfig


def gain_pdf(g: float, n: int) -> float:
    """Gamma(n, 1) density of the beamformed channel gain."""
    if g < 0:
        raise ValueError("gain must be non-negative")
    if n < 1:
        raise ValueError("antenna count must be at least 1")
    if g == 0.0:
        return 1.0 if n == 1 else 0.0
    # log form keeps large n stable
    return math.exp((n - 1) * math.log(g) - g - math.lgamma(n))


def gain_cdf(g: float, n: int) -> float:
    """Gamma(n, 1) CDF, i.e. the probability of a deep fade below ``g``."""
    if g < 0:
        raise ValueError("gain must be non-negative")
    return float(gammainc(n, g))


def drop_bound_F(g_th: float, n: int) -> float:
    """Closed-form upper bound on the dropping probability at threshold g_th.

    Equals the integral of (1 - g/g_th) against the Gamma(n-1, 1) density
    over [0, g_th].  Written with regularized lower incomplete gamma terms,
    F = P(m, G) - (m/G) P(m+1, G) with m = n - 1, which avoids the
    catastrophic cancellation a literal truncated-series evaluation hits for
    small G and large n.
    """
    if g_th <= 0:
        raise ValueError("g_th must be positive")
    if n < 2:
        raise ValueError("antenna count must be at least 2")
    m = n - 1
    return float(gammainc(m, g_th) - (m / g_th) * gammainc(m + 1, g_th))


def drop_prob_B(g_th: float, gamma: float, n: int) -> float:
    """Dropping-probability approximation via adaptive quadrature.

    Integrates [1 - ln(1 + g*gamma/g_th)/ln(1 + gamma)] f_n(g) over
    [0, g_th]; absolute error <= 1e-12.  Bounded above by drop_bound_F.
    """
    if g_th <= 0:
        raise ValueError("g_th must be positive")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if n < 2:
        raise ValueError("antenna count must be at least 2")
    log_den = math.log1p(gamma)

    def integrand(g: float) -> float:
        return (1.0 - math.log1p(g * gamma / g_th) / log_den) * gain_pdf(g, n)

    val, _ = quad(integrand, 0.0, g_th, epsabs=1e-13, epsrel=1e-11, limit=200)
    return max(0.0, float(val))


@dataclass(frozen=True)
class GainThreshold:
    """Gain threshold solving drop_bound_F(g_th, antennas) = eps_target."""

    g_th: float
    antennas: int
    eps_target: float


def solve_gain_threshold(n: int, eps_target: float) -> GainThreshold:
    """Invert the dropping bound: find g_th with F(g_th, n) = eps_target.

    F is continuous, 0 at 0+ and increasing to 1, so bisection always
    terminates.  The bracket is tightened far beyond the 1e-3 relative
    tolerance the callers rely on.
    """
    if n < 2:
        raise ValueError("antenna count must be at least 2")
    if not (0.0 < eps_target < 1.0):
        raise ValueError("eps_target must lie strictly in (0, 1)")
    lo, hi = 0.0, 1e-9
    while drop_bound_F(hi, n) < eps_target:
        hi *= 2.0
        if hi > 1e12:  # unreachable for eps_target < 1
            raise RuntimeError("dropping-bound bracket failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if drop_bound_F(mid, n) < eps_target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return GainThreshold(g_th=0.5 * (lo + hi), antennas=n,
                         eps_target=eps_target)


def mean_tx_power(bandwidth: float, gamma: float, alpha: float, n: int,
                  eps_target: float, cfg: SystemConfig) -> float:
    """Average transmit power of the channel-inversion policy, in watts.

    Closed form N0 * W * gamma * (1 - eps_target) / (alpha * (n - 1)), valid
    when the gain threshold is the root of F = eps_target.
    """
    if n < 2:
        raise ValueError("antenna count must be at least 2 (policy mean "
                         "diverges for a single antenna)")
    if bandwidth <= 0 or gamma <= 0 or alpha <= 0:
        raise ValueError("bandwidth, gamma and alpha must be positive")
    if not (0.0 < eps_target < 1.0):
        raise ValueError("eps_target must lie strictly in (0, 1)")
    return (cfg.noise_psd * bandwidth * gamma * (1.0 - eps_target)
            / (alpha * (n - 1)))
