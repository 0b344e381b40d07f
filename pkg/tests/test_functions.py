import math
import sys

import numpy as np
import pytest

from fsens import functions as fn


def test_linear6_values():
    assert fn.linear6(np.ones(6)) == pytest.approx(7.5)
    assert fn.linear6(np.eye(6)[0]) == 1.0


def test_iman_value():
    # ten triple products of ones
    assert fn.iman_risk(np.ones(7)) == pytest.approx(10.0)
    x = np.zeros(7)
    x[[0, 2, 4]] = 2.0
    assert fn.iman_risk(x) == pytest.approx(8.0)


def test_ishigami_values():
    assert fn.ishigami(np.zeros(3)) == 0.0
    x = np.array([math.pi / 2, math.pi / 2, 1.0])
    assert fn.ishigami(x) == pytest.approx(1 + 7 + 0.1)


def test_ishigami_zero_main_effect_of_x3():
    # mean over (x1, x2) at fixed x3 by Gauss-Legendre, exact for these trig integrals
    z, w = np.polynomial.legendre.leggauss(40)
    x1, x2 = np.meshgrid(math.pi * z, math.pi * z, indexing="ij")
    ww = np.outer(w, w) / 4
    means = []
    for x3 in (-2.0, 0.0, 2.0):
        pts = np.stack([x1.ravel(), x2.ravel(), np.full(x1.size, x3)], axis=1)
        means.append(float(ww.ravel() @ fn.ishigami(pts)))
    assert max(means) - min(means) < 1e-10


def test_eval_counter():
    f = fn.builtin("ishigami")
    f(np.zeros((5, 3)))
    f(np.zeros(3))
    assert f.eval_count == 6
    f.reset()
    assert f.eval_count == 0
    with pytest.raises(fn.ModelError):
        f(np.zeros(4))
    with pytest.raises(fn.ModelError):
        fn.builtin("nope")


@pytest.fixture
def script(tmp_path):
    path = tmp_path / "model.py"
    path.write_text(
        "import sys, csv\n"
        "src = open(sys.argv[1]) if len(sys.argv) > 1 else sys.stdin\n"
        "rows = list(csv.reader(src))[1:]\n"
        "for r in rows:\n"
        "    print(sum(float(v) for v in r))\n"
    )
    return f"{sys.executable} {path}"


@pytest.mark.parametrize("mode", ["stdin", "file"])
def test_external_model_round_trip(script, mode):
    f = fn.external(script, 3, batch_size=4, mode=mode)
    x = np.arange(30, dtype=float).reshape(10, 3) / 7
    np.testing.assert_allclose(f(x), x.sum(axis=1), rtol=1e-15)
    assert f.eval_count == 10


def test_external_errors(tmp_path):
    bad = tmp_path / "bad.py"
    bad.write_text("import sys\nsys.stdin.read()\nprint('1.0')\nprint('oops')\n")
    with pytest.raises(fn.ModelError, match="row 2"):
        fn.run_external(f"{sys.executable} {bad}", np.zeros((2, 1)))
    short = tmp_path / "short.py"
    short.write_text("import sys\nsys.stdin.read()\nprint('1.0')\n")
    with pytest.raises(fn.ModelError, match="1 values for 2 rows"):
        fn.run_external(f"{sys.executable} {short}", np.zeros((2, 1)))
    with pytest.raises(fn.ModelError, match="status"):
        fn.run_external(f"{sys.executable} -c 'import sys; sys.exit(4)'", np.zeros((1, 1)))
    nan = tmp_path / "nan.py"
    nan.write_text("import sys\nsys.stdin.read()\nprint('nan')\n")
    with pytest.raises(fn.ModelError, match="non-finite"):
        fn.run_external(f"{sys.executable} {nan}", np.zeros((1, 1)))
