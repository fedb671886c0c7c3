"""Independent reference computations used by the test suite only.

Everything here deliberately avoids the package's own evaluation paths:
recoil matrix elements come from the explicit finite series in 50-digit
arithmetic, expectations from brute-force sums, and propagators from a
uniformization series.
"""

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def fc_modulus_series(eta: float, m: int, n: int) -> float:
    """|<n|exp(i*eta*(a+a^dag))|m>| from the exact finite sum.

    Uses e^{-x/2} sqrt(lo!/hi!) |sum_l (-1)^l C(hi, lo-l) x^l / l!| with
    x = eta^2, lo = min(m, n), hi = max(m, n); every term exact at 50
    digits.
    """
    lo, hi = min(m, n), max(m, n)
    x = mp.mpf(eta) ** 2
    if eta == 0:
        return 1.0 if lo == hi else 0.0
    total = mp.mpf(0)
    for l in range(lo + 1):
        total += (-1) ** l * mp.binomial(hi, lo - l) * x ** l / mp.factorial(l)
    pref = mp.e ** (-x / 2) * mp.sqrt(mp.factorial(lo) / mp.factorial(hi)) \
        * mp.mpf(abs(eta)) ** (hi - lo)
    return float(pref * abs(total))


def laguerre_series(n: int, alpha: int, x: float) -> float:
    """L_n^alpha(x) from the defining sum at high precision."""
    xm = mp.mpf(x)
    total = mp.mpf(0)
    for l in range(n + 1):
        total += (-1) ** l * mp.binomial(n + alpha, n - l) * xm ** l / mp.factorial(l)
    return float(total)


def uniformization_expm(gen: np.ndarray, t: float, tol: float = 1e-14) -> np.ndarray:
    """exp(gen*t) by the uniformization (shifted Taylor) series.

    Valid for generator matrices (nonnegative off-diagonal): shift by the
    most negative diagonal so the series has nonnegative terms.
    """
    c = float(-gen.diagonal().min())
    q = gen + c * np.eye(gen.shape[0])
    out = np.eye(gen.shape[0])
    term = np.eye(gen.shape[0])
    k = 0
    while True:
        k += 1
        term = term @ q * (t / k)
        out += term
        if np.abs(term).max() < tol and k > c * t:
            break
        if k > 10000:
            raise RuntimeError("uniformization did not converge")
    return np.exp(-c * t) * out
