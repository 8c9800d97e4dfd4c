"""High-precision reference values for the test fixtures.

Independent of the C++ implementation: every value is obtained either from a
closed form or from mpmath quadrature of the defining integrals (tanh-sinh at
40 digits).  Run:  python3 tests/oracle/fixtures.py
"""
import mpmath as mp

mp.mp.dps = 40
ln = mp.log
q = mp.quad


def m1_phi(qq, x):
    # M1: rho = (1-v)(3-v)/4, omega = (3(1-v)/(3-v))^(2q)
    f = lambda v: qq * (3 * (1 - v) / (3 - v)) ** (2 * qq) / ((1 - v) * (3 - v) / 4) * v ** x
    return q(f, [0, 1])


def m1_phi_simplified(qq, x):
    if x == 0:
        return mp.mpf(1)
    f = lambda v: x * v ** (x - 1) * (3 * (1 - v) / (3 - v)) ** (2 * qq)
    return q(f, [0, 1])


def m4_psi(qq, x):
    # M4: v - p(v) = sqrt(s)(0.8 - sqrt(s)), s = 1 - v; int_v^1 gamma = 2q ln(0.8/(0.8-sqrt(s)))
    vphi = mp.mpf("0.36")
    def f(v):
        s = 1 - v
        rho = mp.sqrt(s) * (mp.mpf("0.8") - mp.sqrt(s))
        om = ((mp.mpf("0.8") - mp.sqrt(s)) / mp.mpf("0.8")) ** (2 * qq)
        return qq * om / rho * v ** x
    return 1 - q(f, [vphi, 1])


def m3_log_omega(v):
    g = lambda w: 2 * (2 - w) / ((1 - w) * (3 - w))
    return -q(g, [0, v])


def m5_phi0(x):
    f = lambda v: 2 * mp.e ** 4 * mp.exp(-4 / mp.sqrt(1 - v)) / (1 - v) ** 2 * v ** x
    return q(f, [0, mp.mpf(1) / 2, mp.mpf("0.9"), mp.mpf("0.99"), 1])


def m3_mean_passage(x, a):
    # exp(int_v^1 2/(3-w)) = ((3-v)/2)^2 ; rho = (1-v)(3-v)/2
    f = lambda v: (v ** a - v ** x) * ((3 - v) / 2) ** 2 / ((1 - v) * (3 - v) / 2)
    return q(f, [0, 1])


def m4_mean_explosion(x):
    vphi = mp.mpf("0.36")
    I = lambda v: 2 * ln(mp.mpf("0.8") / (mp.mpf("0.8") - mp.sqrt(1 - v)))
    return x * q(lambda v: v ** (x - 1) * I(v), [vphi, 1])


def m2_lt(qq):
    # closed form for the supercritical-culling example
    return (3 - qq + 2 ** qq * (qq - 1) * qq * q(lambda v: v ** qq / (1 - v), [0, mp.mpf(1) / 2])) / 4


def m2_phi(qq, x):
    # direct: rho=(1-v)(1-2v), gamma=(q+1-1/v)/rho, delimiter phi_q = 1/(1+q)
    phq = 1 / (1 + qq)
    g = lambda w: (qq + 1 - 1 / w) / ((1 - w) * (1 - 2 * w))
    def f(v):
        L = -q(g, [phq, v])
        return qq * mp.exp(L) / ((1 - v) * (1 - 2 * v)) * v ** x
    return q(f, [0, phq, mp.mpf(1) / 2])


def m1_phiqq(qq, qb, x):
    vb = 4 - mp.sqrt(13) if qb == 1 else None
    rhob = lambda v: mp.mpf(3) / 4 - v + v * v / 4 - qb * v
    g = lambda w: qq / rhob(w)
    def f(v):
        return qq * mp.exp(-q(g, [0, v])) / rhob(v) * v ** x
    return q(f, [0, vb])


def m3_tilt_qbar(qb):
    # root of (lambda+qb)/lambda = p(z)/z for M3 (lambda=2): z^2/4 - (1+qb/2) z + 3/4 = 0
    b = 1 + qb / 2
    return 2 * (b - mp.sqrt(b * b - mp.mpf(3) / 4))


out = {}
for qq in (mp.mpf("0.5"), mp.mpf(1), mp.mpf(2)):
    for x in (0, 1, 2, 5):
        out[f"M1 Phi_{qq}({x})"] = m1_phi(qq, x)
out["M1 Phi_0.5(1) closed 3-6ln1.5"] = 3 - 6 * ln(1.5)
out["M1 Phi_0.5(2) closed"] = 6 * (2.5 - 6 * ln(1.5))
out["M1 Phi_1(1) closed 15-36ln1.5"] = 15 - 36 * ln(1.5)
out["M1 Phi_1(2) closed 18(6.5-16ln1.5)"] = 18 * (6.5 - 16 * ln(1.5))
P = lambda qq, x: m1_phi(mp.mpf(qq), x)
out["M1 atmin_lt_G q=.5 a=.5 x=2 k=1"] = P(1, 2) / P(0.5, 2) * P(0.5, 1) / P(1, 1)
out["M1 atmin_lt_residual q=.5 a=.5 x=2 k=1"] = mp.mpf(0.5) * (1 - P(1, 1) / P(1, 0)) / (1 - P(0.5, 1) / P(0.5, 0))
out["M1 gen up prob state1"] = mp.mpf(0.25) * P(0.5, 2) / (mp.mpf(1.5) * P(0.5, 1))
out["M1 gen kill rate"] = mp.mpf(0.75) * P(0.5, 0) / P(0.5, 1)
out["M1 W_0(1)"] = P(0.5, 1) / (P(0.5, 0) - P(0.5, 1))
out["M1 W_1(2)"] = P(0.5, 2) / (P(0.5, 1) - P(0.5, 2))
out["M1 W_0(2)"] = P(0.5, 2) / (P(0.5, 0) - P(0.5, 1))
out["M1 log_omega_lower q=.5 v=.5"] = -ln(2.5 / 1.5)
out["M3 log_omega_lower q=1 v=.5 quad"] = m3_log_omega(mp.mpf("0.5"))
out["M3 log_omega_lower closed -ln2.4"] = -ln(2.4)
out["M4 log_omega_upper q=1 v=.99"] = -2 * ln(0.8 / (0.8 - 0.1))
for qq in (1, 2):
    out[f"M4 Psi_{qq}(1) quad"] = m4_psi(mp.mpf(qq), 1)
    out[f"M4 Psi_{qq}(1) closed"] = mp.mpf("1.28") / ((2 * qq + 1) * (2 * qq + 2))
    out[f"M4 Psi_{qq}(0) quad"] = m4_psi(mp.mpf(qq), 0)
out["M4 mean explosion x=1"] = m4_mean_explosion(1)
out["M4 mean explosion x=2"] = m4_mean_explosion(2)
out["M3 mean passage 1->0"] = m3_mean_passage(1, 0)
out["M1 mean passage 1->0"] = 4 * ln(1.5)
out["M1 mean passage 2->1"] = 12 * ln(1.5) - 4
for x in (0, 1, 2, 3):
    out[f"M5 Phi0({x})"] = m5_phi0(x)
out["M5 P_1(T0<inf)"] = m5_phi0(1) / m5_phi0(0)
out["M5 P_2(T0<inf)"] = m5_phi0(2) / m5_phi0(0)
out["M2 lt q=1"] = m2_lt(mp.mpf(1))
out["M2 lt q=2 closed"] = m2_lt(mp.mpf(2))
out["M2 lt q=2 direct"] = m2_phi(mp.mpf(2), 1) / m2_phi(mp.mpf(2), 0)
out["M2 lt q=3 direct"] = m2_phi(mp.mpf(3), 1) / m2_phi(mp.mpf(3), 0)
out["M2 lt q=3 closed"] = m2_lt(mp.mpf(3))
out["M1 varphi_1"] = 4 - mp.sqrt(13)
out["M1 varphi_1 ^2"] = (4 - mp.sqrt(13)) ** 2
out["M2 varphi_3"] = (2 - mp.sqrt(4 - 4 * mp.mpf(2) / 3 / 3)) / (2 * mp.mpf(2) / 3)
out["M1 Phi_{0.5,1}(2)/Phi(0)"] = m1_phiqq(mp.mpf(0.5), 1, 2) / m1_phiqq(mp.mpf(0.5), 1, 0)
out["M1 tilt p0' (qbar=1)"] = mp.mpf(0.75) / (mp.mpf(0.75) + (4 - mp.sqrt(13)) ** 2 / 4)
out["M3 varphi_0.5"] = m3_tilt_qbar(mp.mpf(0.5))
out["M3 (1+X) functional x=3 a=1 qbar=.5"] = mp.mpf(2) / 4 * m3_tilt_qbar(mp.mpf(0.5)) ** 2
for k, v in out.items():
    print(f"{k:45s} {mp.nstr(v, 17)}")
