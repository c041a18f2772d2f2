"""Modified Bessel function of the second kind, K_nu(x), for real order.

Temme's method: the order is split as nu = n + mu with |mu| <= 1/2. K_mu and
K_{mu+1} come from Temme's series when x < 2 and from Steed's continued
fraction (CF2) otherwise, then K_nu follows by forward recurrence, which is
stable for K. Everything is carried in log space so that large orders at
small arguments do not overflow.

Near integer orders the quotients pi*mu/sin(pi*mu) and sinh(e)/e are taken
from their two-term series instead of being divided out, which is the
integer-order limit path; the order itself is never rounded.
"""
from __future__ import annotations

import math

import numpy as np

_EPS = 1e-16
_MAXIT = 10000
_XMIN = 2.0
_SERIES_CUTOFF = 1e-4

# 1/Gamma(z) = sum a_k z^k (Abramowitz & Stegun 6.1.34), first terms only;
# used for the small-mu expansion of gam1.
_A2 = 0.5772156649015329
_A4 = -0.0420026350340952
_A6 = -0.0421977345555443


def _gam1_gam2(mu: float) -> tuple[float, float, float, float]:
    """Temme's auxiliary functions and 1/Gamma(1 +- mu)."""
    gampl = 1.0 / math.gamma(1.0 + mu)
    gammi = 1.0 / math.gamma(1.0 - mu)
    gam2 = 0.5 * (gammi + gampl)
    if abs(mu) < 1e-3:
        mu2 = mu * mu
        gam1 = -(_A2 + _A4 * mu2 + _A6 * mu2 * mu2)
    else:
        gam1 = (gammi - gampl) / (2.0 * mu)
    return gam1, gam2, gampl, gammi


def _x_over_sin(t: float) -> float:
    if abs(t) < _SERIES_CUTOFF:
        return 1.0 + t * t / 6.0
    return t / math.sin(t)


def _sinh_over_x(t: float) -> float:
    if abs(t) < _SERIES_CUTOFF:
        return 1.0 + t * t / 6.0
    return math.sinh(t) / t


def _temme_series(mu: float, x: float) -> tuple[float, float]:
    """K_mu(x), K_{mu+1}(x) for x < 2."""
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = _x_over_sin(pimu)
    d = -math.log(x2)
    e = mu * d
    fact2 = _sinh_over_x(e)
    gam1, gam2, gampl, gammi = _gam1_gam2(mu)
    ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
    total = ff
    e = math.exp(e)
    p = 0.5 * e / gampl
    q = 0.5 / (e * gammi)
    c = 1.0
    d = x2 * x2
    total1 = p
    mu2 = mu * mu
    for i in range(1, _MAXIT):
        ff = (i * ff + p + q) / (i * i - mu2)
        c *= d / i
        p /= i - mu
        q /= i + mu
        delta = c * ff
        total += delta
        total1 += c * (p - i * ff)
        if abs(delta) < abs(total) * _EPS:
            break
    else:  # pragma: no cover
        raise ArithmeticError(f"Temme series did not converge (mu={mu}, x={x})")
    return total, total1 * 2.0 / x


def _steed_cf2(mu: float, x: float) -> tuple[float, float]:
    """log K_mu(x) and the ratio K_{mu+1}/K_mu for x >= 2."""
    mu2 = mu * mu
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25 - mu2
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _MAXIT):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    else:  # pragma: no cover
        raise ArithmeticError(f"CF2 did not converge (mu={mu}, x={x})")
    h *= a1
    log_kmu = 0.5 * math.log(math.pi / (2.0 * x)) - x - math.log(s)
    ratio = (mu + x + 0.5 - h) / x
    return log_kmu, ratio


def log_bessel_k_scalar(nu: float, x: float) -> float:
    """log K_nu(x) for real nu and x > 0."""
    if not (x > 0 and math.isfinite(x)):
        raise ValueError(f"K_nu(x) needs finite x > 0, got {x!r}")
    if not math.isfinite(nu):
        raise ValueError(f"order must be finite, got {nu!r}")
    nu = abs(nu)  # K_{-nu} = K_nu
    n = int(nu + 0.5)
    mu = nu - n
    if x < _XMIN:
        kmu, k1 = _temme_series(mu, x)
        log_scale = math.log(kmu)
        ratio = k1 / kmu
    else:
        log_scale, ratio = _steed_cf2(mu, x)
    # Forward recurrence on the ratio r_j = K_{mu+j+1}/K_{mu+j}:
    #   K_{v+1} = (2v/x) K_v + K_{v-1}  =>  r_j = 2(mu+j)/x + 1/r_{j-1}
    for j in range(1, n + 1):
        log_scale += math.log(ratio)
        ratio = 2.0 * (mu + j) / x + 1.0 / ratio
    return log_scale


def log_bessel_k(nu, x):
    """Vectorized ``log_bessel_k_scalar``; broadcasts ``nu`` against ``x``."""
    nu_b, x_b = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(x, dtype=float))
    out = np.empty(nu_b.shape)
    for idx in np.ndindex(out.shape):
        out[idx] = log_bessel_k_scalar(float(nu_b[idx]), float(x_b[idx]))
    return out if out.ndim else float(out)


def bessel_k(nu, x):
    """K_nu(x); may underflow to 0 for large x, use ``log_bessel_k`` there."""
    return np.exp(log_bessel_k(nu, x))
