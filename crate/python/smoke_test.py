"""Smoke test for the Python bindings.

Uses an installed `skewdirac_py` if present, otherwise the library built by

    cargo build -p skewdirac-py --release --features extension-module
"""

import cmath
import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def import_module():
    try:
        import skewdirac_py
        return skewdirac_py
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libskewdirac_py.so", "libskewdirac_py.dylib", "skewdirac_py.dll"):
            built = ROOT / "target" / profile / name
            if built.exists():
                tmp = Path(tempfile.mkdtemp())
                suffix = ".pyd" if name.endswith(".dll") else ".so"
                shutil.copy(built, tmp / f"skewdirac_py{suffix}")
                sys.path.insert(0, str(tmp))
                import skewdirac_py
                return skewdirac_py
    sys.exit("skewdirac_py not found; build it first (see the module docstring)")


sd = import_module()

# scalar continuous: φ = i/z, v = 2 sech 2x
r = sd.Realization("continuous", [[0]], [[1]], [[1j]])
p = sd.invert_continuous(r)
for x in (0.0, 0.5, 1.0, 3.0):
    v = p.at(x)[0][0]
    assert abs(v - 2 / math.cosh(2 * x)) < 1e-9, (x, v)
for z in (0.5 + 1j, 3j):
    assert abs(p.weyl(z)[0][0] - 1j / z) < 1e-12
assert p.decay() == (True, True)
rep = p.weyl_defect([[1j / 2j]], 2j)
assert rep.verdict == "pass" and rep.step_error < 1e-6, (rep.ratio, rep.step_error)
assert p.weyl_defect([[1j / 2j + 0.1]], 2j).verdict == "fail"

# quadruple JSON round trip
q = p.quadruple
again = sd.Quadruple.from_json(q.to_json())
assert abs(sd.ContinuousPotential.from_quadruple(again).at(0.7)[0][0] - p.at(0.7)[0][0]) == 0

# scalar discrete: φ = √3/(z+i)
d = sd.invert_discrete(sd.Realization("discrete", [[-1j]], [[1]], [[math.sqrt(3)]]), 40)
assert d.K == 40 and d.invariants_ok()
assert d.distance_to_j()[-1] < 1e-6
assert abs(d.weyl(2j)[0][0] - math.sqrt(3) / 3j) < 1e-12
lm = d.r_lambda_min
assert len(lm) == 40 and all(b >= a for a, b in zip(lm, lm[1:]))

# refused input
try:
    sd.invert_discrete(sd.Realization("discrete", [[0]], [[1]], [[1]]))
except sd.SkewDiracError as e:
    assert "σ(α)" in str(e)
else:
    raise AssertionError("i ∈ σ(α) accepted")

# θ2 = 0 generates C_k = j
j = sd.DiscretePotential.from_quadruple(sd.Quadruple([[2j]], [[1]], [[2]], [[0]]), 20)
assert max(d for d in j.distance_to_j()) < 1e-12

rows = sd.run_corpus(str(ROOT / "corpus"))
assert rows and all(ok for _, _, _, ok, _ in rows), rows

cfg = json.loads((ROOT / "corpus" / "stability" / "sech.json").read_text())
cfg["trials"] = 5
assert json.loads(sd.run_sweep(json.dumps(cfg)))["verdict"] == "pass"

print(f"python bindings ok ({len(rows)} corpus cases)")
