"""Reference values for N-function tests, computed at 50 digits with mpmath.

Writes nfunc_oracle.inc; rerun only when the cases below change.
"""
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50

tau0 = mp.findroot(lambda s: mp.log(s) - 2 * (mp.log(s) / s + 1), 11.3)


def exp_gt(g, tau):
    return lambda t: mp.exp(t / mp.log(t + tau) ** g)


def families():
    yield "exp_star", lambda t: mp.expm1(t)
    yield "exp_alpha:alpha=2.5", lambda t: mp.expm1(mp.mpf("2.5") * t)
    yield "power:p=3", lambda t: t ** 3
    yield "power:p=1.5", lambda t: t ** mp.mpf("1.5")
    for g, tau_txt, tau in [("0.5", "tau0", tau0), ("1", "tau0", tau0), ("1", "2*tau0", 2 * tau0),
                            ("0.5", "20", mp.mpf(20))]:
        e = exp_gt(mp.mpf(g), tau)
        yield f"exp:gamma={g},tau={tau_txt}", e
        yield f"exp_star:gamma={g},tau={tau_txt}", (lambda e: lambda t: e(t) - 1)(e)
        c = 1 / mp.log(tau) ** mp.mpf(g)
        yield f"tilde_exp:gamma={g},tau={tau_txt}", (lambda e, c: lambda t: e(t) - 1 - c * t)(e, c)
    yield "tilde_exp:gamma=0,tau=2*tau0", lambda t: mp.exp(t) - 1 - t
    yield "exp_star:lambda=2", lambda t: mp.expm1(t / 2)


points = ["1e-6", "0.01", "0.5", "1", "3.25", "10", "40"]

lines = [f"// Generated by gen_nfunc.py (mpmath, 50 digits).",
         f"constexpr double kTau0 = {mp.nstr(tau0, 17)};",
         "struct NfuncCase { const char* phi; double t; double value; double d1; double d2; };",
         "constexpr NfuncCase kNfuncCases[] = {"]
for name, f in families():
    for p in points:
        t = mp.mpf(p)
        v = f(t)
        d1 = mp.diff(f, t)
        d2 = mp.diff(f, t, 2)
        lines.append(f'    {{"{name}", {p}, {mp.nstr(v, 17)}, {mp.nstr(d1, 17)}, {mp.nstr(d2, 17)}}},')
lines.append("};")
Path(__file__).with_name("nfunc_oracle.inc").write_text("\n".join(lines) + "\n")
