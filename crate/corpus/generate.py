"""Regenerates the expected values in corpus/*.json.

Every number here comes from an oracle independent of the Rust code:
closed forms, plain-loop recursions in 60-digit arithmetic (mpmath),
adaptive quadrature for R(x), and scipy's Riccati solver.

    python corpus/generate.py
"""

import json
from pathlib import Path

import mpmath as mp
import numpy as np
from scipy.linalg import solve_continuous_are

mp.mp.dps = 60
HERE = Path(__file__).resolve().parent


def mat(m):
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return {
        "rows": m.shape[0],
        "cols": m.shape[1],
        "data": [[[float(z.real), float(z.imag)] for z in row] for row in m],
    }


def mpmat(m):
    return mat(np.array([[complex(m[i, j]) for j in range(m.cols)] for i in range(m.rows)]))


def realization(conv, a, b, c):
    a, b, c = (np.atleast_2d(np.asarray(x, dtype=complex)) for x in (a, b, c))
    m1, m2 = (b.shape[1], c.shape[0]) if conv == "continuous" else (c.shape[0], b.shape[1])
    return {"convention": conv, "n": a.shape[0], "m1": m1, "m2": m2,
            "A": mat(a), "B": mat(b), "C": mat(c)}


def quadruple(alpha, s0, t1, t2):
    alpha, s0, t1, t2 = (np.atleast_2d(np.asarray(x, dtype=complex)) for x in (alpha, s0, t1, t2))
    return {"n": alpha.shape[0], "m1": t1.shape[1], "m2": t2.shape[1],
            "alpha": mat(alpha), "S0": mat(s0), "theta1": mat(t1), "theta2": mat(t2)}


def riccati(conv, a, b, c):
    """Maximal solution of X C*C X + s·i(AX − XA*) − BB* = 0 (s = ±1)."""
    s = 1.0 if conv == "continuous" else -1.0
    g = s * 1j * a.conj().T
    return solve_continuous_are(g, c.conj().T, b @ b.conj().T, np.eye(c.shape[0]))


def recover(conv, a, b, c):
    x = riccati(conv, a, b, c)
    bbx = b @ b.conj().T @ np.linalg.inv(x)
    if conv == "continuous":
        return a + 1j * bbx, x, b, 1j * x @ c.conj().T
    return -a + 1j * bbx, x, x @ c.conj().T, 1j * b


def to_mp(m):
    m = np.atleast_2d(m)
    return mp.matrix([[mp.mpc(complex(z)) for z in row] for row in m])


def adj(m):
    return m.transpose_conj()


def potential_quadrature(q, x):
    """2ϑ1*e^{2ixα*}R(x)⁻¹ϑ2, R from adaptive quadrature of the integrand."""
    alpha, s0, t1, t2 = (to_mp(v) for v in q)
    n = alpha.rows
    g = t1 * adj(t1)

    def integrand(t, i, j):
        e = mp.expm(-2j * t * alpha)
        return (2 * e * g * adj(e))[i, j]

    r = s0.copy()
    if x > 0:
        for i in range(n):
            for j in range(n):
                r[i, j] += mp.quad(lambda t: integrand(t, i, j), [0, x])
    return 2 * adj(t1) * mp.expm(2j * x * adj(alpha)) * mp.inverse(r) * t2


def c_literal(q, k_max):
    """(Λ, S) recursion and C_k in 60-digit arithmetic."""
    alpha, s, t1, t2 = (to_mp(v) for v in q)
    m1, m2 = t1.cols, t2.cols
    j = mp.diag([1] * m1 + [-1] * m2)
    ai = mp.inverse(alpha)
    lam = mp.matrix(alpha.rows, m1 + m2)
    for r in range(alpha.rows):
        for c in range(m1):
            lam[r, c] = t1[r, c]
        for c in range(m2):
            lam[r, m1 + c] = t2[r, c]
    out = []
    for _ in range(k_max):
        f = adj(lam) * mp.inverse(s) * lam
        s = s + ai * s * adj(ai) + ai * lam * j * adj(lam) * adj(ai)
        lam = lam + 1j * ai * lam * j
        out.append(j + f - adj(lam) * mp.inverse(s) * lam)
    return out


def weyl_realization(a, b, c, z):
    return c @ np.linalg.solve(z * np.eye(a.shape[0]) - a, b)


def write(name, case):
    (HERE / f"{name}.json").write_text(json.dumps(case, indent=1) + "\n")


DEFECT_Z = [[0.0, 2.0], [0.0, 3.0], [0.0, 4.0]]
PROBE_Z = [complex(0.5, 1.0), complex(-2.0, 0.5), complex(0.0, 3.0), complex(1.5, 2.5)]

# scalar continuous: φ = i/z, v = 2 sech 2x
xs = [0.25 * k for k in range(21)]
write("sech", {
    "name": "sech",
    "description": "Scalar continuous case with Weyl function i/z.",
    "source": "closed form v(x) = 2 sech(2x), quadruple {i, 1, 1, 1}",
    "realization": realization("continuous", [[0]], [[1]], [[1j]]),
    "tolerance": 1e-9,
    "expected": {
        "quadruple": quadruple([[1j]], [[1]], [[1]], [[1]]),
        "potential": [{"x": x, "value": mat([[2 / np.cosh(2 * x)]])} for x in xs],
        "weyl": [{"z": [z.real, z.imag], "value": mat([[1j / z]])} for z in PROBE_Z],
        "weyl_round_trip": 1e-8,
        "decay": True,
        "weyl_defect_z": DEFECT_Z,
    },
})

# scalar discrete: φ = √3/(z+i)
q3 = (np.array([[2j]]), np.array([[1.0]]), np.array([[3 ** 0.5]]), np.array([[1j]]))
cs = c_literal(q3, 40)
write("sqrt3_discrete", {
    "name": "sqrt3_discrete",
    "description": "Scalar discrete case with Weyl function sqrt(3)/(z+i).",
    "source": "quadruple {2i, 1, sqrt 3, i} by substitution; C_k from a 60-digit plain-loop recursion",
    "realization": realization("discrete", [[-1j]], [[1]], [[3 ** 0.5]]),
    "tolerance": 1e-12,
    "expected": {
        "quadruple": quadruple(*q3),
        "K": 50,
        "c": [{"k": k, "value": mpmat(c)} for k, c in enumerate(cs)],
        "weyl": [{"z": [z.real, z.imag], "value": mat([[3 ** 0.5 / (z + 1j)]])} for z in PROBE_Z],
        "weyl_round_trip": 1e-8,
        "tail_below": 1e-6,
        "weyl_defect_z": DEFECT_Z,
    },
})

# ϑ2 = 0 and ϑ1 = 0 discrete quadruples
for name, t1, t2, what in [("theta2_zero_discrete", 2, 0, "theta2"), ("theta1_zero_discrete", 0, 2, "theta1")]:
    write(name, {
        "name": name,
        "description": f"Discrete quadruple with {what} = 0; generates C_k = j.",
        "source": f"{what} = 0 makes the recursion fix C_k = j (closed form)",
        "mode": "discrete",
        "quadruple": quadruple([[2j]], [[1]], [[t1]], [[t2]]),
        "tolerance": 1e-12,
        "expected": {"K": 50, "c_equals_j": True},
    })

# 2×2 continuous
a = np.array([[0, 0.5], [-0.5, 0]], dtype=complex)
b = np.eye(2, dtype=complex)
c = np.array([[1, 0.5], [0, 1]], dtype=complex)
qc = recover("continuous", a, b, c)
write("two_by_two_continuous", {
    "name": "two_by_two_continuous",
    "description": "2x2 continuous case with a rotation generator.",
    "source": "quadruple from scipy's Riccati solver; potential from adaptive quadrature of R(x) in 60 digits",
    "realization": realization("continuous", a, b, c),
    "tolerance": 1e-8,
    "expected": {
        "quadruple": quadruple(*qc),
        "potential": [{"x": x, "value": mpmat(potential_quadrature(qc, x))} for x in [0.0, 0.5, 1.0, 2.0]],
        "weyl": [{"z": [z.real, z.imag], "value": mat(weyl_realization(a, b, c, z))}
                 for z in PROBE_Z],
        "weyl_round_trip": 1e-8,
        "decay": True,
        "weyl_defect_z": DEFECT_Z,
    },
})

# 2×2 discrete
a = np.array([[-0.5j, 0.3], [0, -1.5j]])
b = np.array([[1, 0], [0.5, 1]], dtype=complex)
c = np.eye(2, dtype=complex)
qd = recover("discrete", a, b, c)
assert min(abs(np.linalg.eigvals(qd[0]) - 1j)) > 1e-3
write("two_by_two_discrete", {
    "name": "two_by_two_discrete",
    "description": "2x2 discrete case with a triangular generator.",
    "source": "quadruple from scipy's Riccati solver; C_k from a 60-digit plain-loop recursion",
    "realization": realization("discrete", a, b, c),
    "tolerance": 1e-8,
    "expected": {
        "quadruple": quadruple(*qd),
        "K": 50,
        "c": [{"k": k, "value": mpmat(m)} for k, m in enumerate(c_literal(qd, 40))],
        "weyl": [{"z": [z.real, z.imag], "value": mat(weyl_realization(a, b, c, z))} for z in PROBE_Z],
        "weyl_round_trip": 1e-8,
        "tail_below": 1e-6,
        "weyl_defect_z": DEFECT_Z,
    },
})

# stability sweeps
for name in ["sech", "sqrt3_discrete", "two_by_two_continuous", "two_by_two_discrete"]:
    base = json.loads((HERE / f"{name}.json").read_text())["realization"]
    (HERE / "stability").mkdir(exist_ok=True)
    (HERE / "stability" / f"{name}.json").write_text(json.dumps({
        "base": base,
        "deltas": [1e-2, 1e-3, 1e-4, 1e-5],
        "trials": 30,
        "seed": 2024,
    }, indent=1) + "\n")
