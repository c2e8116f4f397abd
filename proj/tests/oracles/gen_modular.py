"""Reference modulars of the field recipes, computed with mpmath quadrature.

Writes modular_oracle.inc.
"""
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40
e1 = mp.exp(-1)


def uprime(x):
    return mp.log(1 / (mp.e * mp.sqrt(abs(x))))


def w1k_modular(scale, tilde=False):
    # Symmetric in x; the integrand is phi(|u'|) on (0, 1/e) and 0 beyond.
    def f(x):
        s = scale * abs(uprime(x))
        return mp.expm1(s) - (s if tilde else 0)
    return 2 * mp.quad(f, [0, mp.exp(-2), e1])


cases = [
    ("exp_star", "linear", mp.e - 2),
    ("power:p=2", "linear", mp.mpf(1) / 3),
    ("exp_star", "example_ex_u", mp.quad(lambda x: mp.expm1(-mp.log(x) / 2), [0, 1])),
    ("power:p=2", "example_ex_u", mp.quad(lambda x: mp.log(x) ** 2 / 4, [0, 1])),
    ("exp_star", "x_log_inv_x", mp.quad(lambda x: mp.expm1(-x * mp.log(x)), [0, 1])),
    ("exp_star", "w1k_uprime", w1k_modular(1)),
    ("exp_star:lambda=2", "w1k_uprime", w1k_modular(mp.mpf(1) / 2)),
    ("tilde_exp:gamma=0,tau=tau0", "w1k_uprime", w1k_modular(1, tilde=True)),
    ("power:p=4", "w1k_uprime", 2 * mp.quad(lambda x: uprime(x) ** 4, [0, mp.exp(-2), e1])),
]

lines = ["// Generated by gen_modular.py (mpmath, 40 digits).",
         "struct ModularCase { const char* phi; const char* field; double value; };",
         "constexpr ModularCase kModularCases[] = {"]
for phi, field, v in cases:
    lines.append(f'    {{"{phi}", "{field}", {mp.nstr(v, 17)}}},')
lines.append("};")
Path(__file__).with_name("modular_oracle.inc").write_text("\n".join(lines) + "\n")
