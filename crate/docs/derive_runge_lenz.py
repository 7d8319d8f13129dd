"""Symbolic derivation of the planar Kepler generators used by the catalog.

Bracket convention: {f, g} = df/dp_i dg/dq^i - df/dq^i dg/dp_i, so {p, q} = +1.
Run with `python3 docs/derive_runge_lenz.py`.
"""
import sympy as sp

q1, q2, p1, p2 = sp.symbols("q1 q2 p1 p2", real=True)
Q = [q1, q2]
P = [p1, p2]


def br(f, g):
    return sp.simplify(sum(sp.diff(f, P[i]) * sp.diff(g, Q[i]) - sp.diff(f, Q[i]) * sp.diff(g, P[i]) for i in range(2)))


r = sp.sqrt(q1**2 + q2**2)
H = (p1**2 + p2**2) / 2 - 1 / r
M = q1 * p2 - q2 * p1
# A = p x L - q/r with L = M e_z
A1 = p2 * M - q1 / r
A2 = -p1 * M - q2 / r

print("{H,M}  =", br(H, M))
print("{H,A1} =", br(H, A1))
print("{H,A2} =", br(H, A2))
print("{M,A1} =", br(M, A1))
print("{M,A2} =", br(M, A2))
print("{A1,A2}=", sp.simplify(br(A1, A2) / (H * M)), "* H*M")
print("A^2 - 1 - 2 H M^2 =", sp.simplify(A1**2 + A2**2 - 1 - 2 * H * M**2))

for label, s in (("U-", -2 * H), ("U+", 2 * H)):
    n = sp.sqrt(s)
    B1, B2 = A1 / n, A2 / n
    F = [M, B1, B2]
    print(label)
    for i, j in ((0, 1), (1, 2), (2, 0)):
        b = br(F[i], F[j])
        for h in range(3):
            ratio = sp.simplify(b / F[h])
            if ratio.is_number:
                print(f"  {{F{i+1},F{j+1}}} = {ratio} * F{h+1}")
