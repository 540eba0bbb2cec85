"""The numba kernels and the pure-numpy fallback must be interchangeable.

Full-pipeline equivalence is checked on deliberately small workloads:
the fallback exists for environments without a JIT, not for speed.
"""

import numpy as np
import pytest

from conftest import CORPUS
from triweb.analysis import blaschke_curvature, hexagon_defect
from triweb.errors import ConfigError
from triweb.expr import parse
from triweb.kernels import (
    HAVE_NUMBA,
    compile_expr,
    default_backend,
    jet_coeffs,
    jet_coeffs_many,
)
from triweb.web import trace_leaf

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba unavailable")

BACKENDS = ("numba", "numpy")


class TestKernelEquivalence:
    @pytest.mark.parametrize("text,point", CORPUS)
    def test_single_point(self, text, point):
        prog = compile_expr(parse(text))
        a = jet_coeffs(prog, *point, backend="numba")
        b = jet_coeffs(prog, *point, backend="numpy")
        scale = np.maximum(np.abs(a), 1.0)
        assert (np.abs(a - b) / scale).max() < 1e-13

    def test_grid(self):
        prog = compile_expr(parse("(x+y)*exp(-x)"))
        xs, ys = np.meshgrid(np.linspace(-2, 2, 15), np.linspace(-2, 2, 15))
        a, ca, _ = jet_coeffs_many(prog, xs.ravel(), ys.ravel(), backend="numba")
        b, cb, _ = jet_coeffs_many(prog, xs.ravel(), ys.ravel(), backend="numpy")
        assert not ca.any() and not cb.any()
        scale = np.maximum(np.abs(a), 1.0)
        assert (np.abs(a - b) / scale).max() < 1e-13


class TestGeometryEquivalence:
    def test_traced_leaf(self, paper_web, free_box):
        leaves = {
            backend: trace_leaf(
                paper_web.foliation(3), (1.0, 1.0), 1.0, free_box, 3, backend=backend
            )
            for backend in BACKENDS
        }
        va, vb = leaves["numba"].vertices, leaves["numpy"].vertices
        assert va.shape == vb.shape
        assert np.abs(va - vb).max() <= 1e-9

    def test_curvature(self, paper_web):
        ka = blaschke_curvature(paper_web, (0.3, -0.4), backend="numba")
        kb = blaschke_curvature(paper_web, (0.3, -0.4), backend="numpy")
        assert ka == pytest.approx(kb, rel=1e-12)

    def test_hexagon_defect(self, paper_web):
        defects = [
            hexagon_defect(paper_web, (0.0, 0.0), 0.1, backend=backend).defect
            for backend in BACKENDS
        ]
        assert defects[0] == pytest.approx(defects[1], rel=1e-6, abs=1e-12)


class TestBackendSelection:
    def test_default_prefers_numba(self, monkeypatch):
        monkeypatch.delenv("TRIWEB_BACKEND", raising=False)
        assert default_backend() == "numba"

    def test_env_flag_numpy(self, monkeypatch):
        monkeypatch.setenv("TRIWEB_BACKEND", "numpy")
        assert default_backend() == "numpy"

    def test_env_flag_invalid(self, monkeypatch):
        monkeypatch.setenv("TRIWEB_BACKEND", "gpu")
        with pytest.raises(ConfigError, match="TRIWEB_BACKEND"):
            default_backend()
