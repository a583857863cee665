"""Independent high-precision oracles for values frozen into the Rust tests.

Run with: python3 frozen_values.py
"""
import mpmath as mp

mp.mp.dps = 30


def psi(a, x):
    """Inverse of chi_a(y) = y - a log y on [a, inf), extended by a below."""
    a = mp.mpf(a)
    x = mp.mpf(x)
    if a == 0:
        return x
    if x < a - a * mp.log(a):
        return a
    lo = a
    hi = max(a, x) + a * mp.log(max(a, x)) + 10 * (1 + a)
    while hi - a * mp.log(hi) < x:
        hi *= 2
    for _ in range(200):
        mid = (lo + hi) / 2
        if mid - a * mp.log(mid) < x:
            lo = mid
        else:
            hi = mid
        if hi - lo < mp.mpf(10) ** -6 * hi:
            break
    y = (lo + hi) / 2
    # Newton polish from inside the bracket
    for _ in range(8):
        y = y - (y - a * mp.log(y) - x) / (1 - a / y)
    return y


def tail_bound_d1(alpha, t, R, M, r_exact):
    # d = 1: shell size 2, eta = 0, log d = 0.
    s = mp.mpf(0)
    for r in range(R + 1, r_exact + 1):
        p = psi(mp.mpf(r) / t, M) ** (-alpha)
        s += 2 * min(1, p)
    # remaining tail by Euler-Maclaurin (integral + half end term) of the
    # smooth decreasing summand
    f = lambda r: 2 * psi(r / t, M) ** (-alpha)
    tail = mp.quad(f, [r_exact, 1e7, 1e9, 1e12, mp.inf]) - f(mp.mpf(r_exact)) / 2
    return s, tail


if __name__ == "__main__":
    t = mp.mpf(10) ** 4
    print("r_t(d=1,alpha=4,t=1e4) =", mp.nstr((t / mp.log(t)) ** (mp.mpf(4) / 3), 17))
    print("e^-2 I0(2) =", mp.nstr(mp.exp(-2) * mp.besseli(0, 2), 17))
    print("psi(1, 2 - log 2) =", mp.nstr(psi(1, 2 - mp.log(2)), 17))

    def x1(x, alpha=2, d=1, theta=2, q=1):
        return alpha * mp.quad(lambda y: mp.exp(-theta * y ** (d - alpha)) / (y + q * abs(x)) ** (alpha + 1), [0, 1, mp.inf])

    for x in [0, 0.5, 1, 3]:
        print("x1_density(d=1,alpha=2,x=%s) =" % x, mp.nstr(x1(x), 17))
    # d=1, alpha=4: q=1/3, theta=2
    for x in [0, 1]:
        print("x1_density(d=1,alpha=4,x=%s) =" % x, mp.nstr(x1(x, alpha=4, theta=2, q=mp.mpf(1) / 3), 17))

    def joint(x1_, x2_, alpha=2, d=1, theta=2, q=1):
        return mp.quad(lambda y: alpha * mp.exp(-theta * y ** (d - alpha)) / ((y + q * abs(x1_)) ** alpha * (y + q * abs(x2_)) ** (alpha + 1)), [0, 1, mp.inf])

    print("joint(1,2) =", mp.nstr(joint(1, 2), 17), " joint(2,1) =", mp.nstr(joint(2, 1), 17))
    s, tail = tail_bound_d1(4, 100, 1000, 5, r_exact=20_000)
    print("tail_miss_bound(d=1,alpha=4,t=100,R=1000,M=5) =", mp.nstr(s + tail, 17), "(partial", mp.nstr(s, 12), "tail", mp.nstr(tail, 6), ")")
