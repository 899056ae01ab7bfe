"""
Regenerate tests/fixtures/oracles.json from independent reference computations.

Kernel values use mpmath at 60 digits with the Hurst functions and the
covariance re-implemented from scratch (no imports from the package). The
Lambda values are plain Monte Carlo over the exact fBm covariance of three
points, with their standard errors.

    python tests/oracles/generate_fixtures.py
"""
import json
from pathlib import Path

import mpmath as mp
import numpy as np

mp.mp.dps = 60
OUT = Path(__file__).resolve().parent.parent / "fixtures" / "oracles.json"


def c_squared(x):
    x = mp.mpf(x)
    d = 1 - 2 * x
    # cos(pi x) / (1 - 2x) has the removable value pi/2 at x = 1/2
    ratio = mp.pi / 2 if d == 0 else mp.cospi(x) / d
    return 2 * ratio * mp.gamma(2 - 2 * x) / x


def smooth(u):
    u = min(max(u, mp.mpf(0)), mp.mpf(1))
    return u**3 * (6 * u**2 - 15 * u + 10)


def plateau(hmin, hmax, a, b):
    hmin, hmax, a, b = map(mp.mpf, (hmin, hmax, a, b))
    w = min(a, 1 - b, mp.mpf("0.1"))

    def h(t):
        t = mp.mpf(t)
        return hmin + (hmax - hmin) * (smooth((a - t) / w) + smooth((t - b) / w))

    return h


def cusp_p2(hmin, x, c, cap):
    hmin, x, c, cap = map(mp.mpf, (hmin, x, c, cap))
    return lambda t: min(hmin + c * (mp.mpf(t) - x) ** 2, cap)


def constant(H):
    return lambda t: mp.mpf(H)


def R(h, t, s):
    t, s = mp.mpf(t), mp.mpf(s)
    ht, hs = h(t), h(s)
    hts = (ht + hs) / 2
    pref = c_squared(hts) / (2 * mp.sqrt(c_squared(ht) * c_squared(hs)))

    def pw(u):
        return mp.mpf(0) if u == 0 else abs(u) ** (2 * hts)

    return pref * (pw(t) + pw(s) - pw(t - s))


def inc_cov(h, n, k, i, j):
    n = mp.mpf(n)
    return (R(h, (i + k) / n, (j + k) / n) - R(h, i / n, (j + k) / n)
            - R(h, (i + k) / n, j / n) + R(h, i / n, j / n))


def expected_qv(h, n, k):
    return mp.fsum(inc_cov(h, n, k, i, i) for i in range(n - k + 1))


def lambda_mc(H, draws=10_000_000, chunk=1_000_000, seed=20240601):
    """psi over consecutive second-order differences of fBm at times 0..3."""
    t = np.arange(1.0, 4.0)
    T, S = np.meshgrid(t, t, indexing="ij")
    cov = 0.5 * (T ** (2 * H) + S ** (2 * H) - np.abs(T - S) ** (2 * H))
    L = np.linalg.cholesky(cov)
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    for _ in range(draws // chunk):
        B = rng.standard_normal((chunk, 3)) @ L.T
        x = -2.0 * B[:, 0] + B[:, 1]            # B0 - 2 B1 + B2 with B0 = 0
        y = B[:, 0] - 2.0 * B[:, 1] + B[:, 2]
        v = np.abs(x + y) / (np.abs(x) + np.abs(y))
        total += v.sum()
        total_sq += (v * v).sum()
    mean = total / draws
    var = (total_sq - draws * mean * mean) / (draws - 1)
    return {"H": H, "mean": mean, "se": float(np.sqrt(var / draws)), "draws": draws}


def s(x):
    return mp.nstr(x, 30)


def main():
    plat = plateau("0.3", "0.7", "0.4", "0.6")
    cusp = cusp_p2("0.3", "0.5", "1.5", "0.8")
    data = {
        "c_coef": {"0.3": s(mp.sqrt(c_squared("0.3"))), "0.5": s(mp.sqrt(c_squared("0.5"))),
                   "0.8": s(mp.sqrt(c_squared("0.8")))},
        "r_cov_plateau": [
            {"t": t, "s": u, "value": s(R(plat, mp.mpf(t), mp.mpf(u)))}
            for t, u in [("0.5", "0.25"), ("0.45", "0.35"), ("0.95", "0.05"), ("1", "0.37")]
        ],
        "increment_cov_plateau_256": [
            {"k": k, "i": i, "j": j, "value": s(inc_cov(plat, 256, k, i, j))}
            for k, i, j in [(1, 100, 100), (1, 100, 101), (2, 95, 110), (1, 0, 255), (2, 254, 254), (1, 30, 200)]
        ],
        "increment_cov_cusp_256": [
            {"k": k, "i": i, "j": j, "value": s(inc_cov(cusp, 256, k, i, j))}
            for k, i, j in [(1, 128, 128), (2, 120, 130), (1, 10, 240)]
        ],
        "expected_qv": [
            {"family": "plateau", "n": 256, "k": 1, "value": s(expected_qv(plat, 256, 1))},
            {"family": "plateau", "n": 256, "k": 2, "value": s(expected_qv(plat, 256, 2))},
            {"family": "cusp", "n": 256, "k": 1, "value": s(expected_qv(cusp, 256, 1))},
        ],
        "increment_cov_const_07": s(inc_cov(constant("0.7"), 100, 1, 10, 12)),
        "lambda_mc_a2": [lambda_mc(H) for H in (0.25, 0.5, 0.75)],
    }
    OUT.write_text(json.dumps(data, indent=2) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
