"""Linearity certificates and the full verification pipelines."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from triweb.errors import ConfigError, TraceError
from triweb.expr import parse
from triweb.transform import identity_map, linearizing_map
from triweb.verify import (
    collinearity_residual,
    diagonal_seeds,
    foliation_linearity,
    verify_family,
    verify_linearization,
    verify_map,
)
from triweb.web import Domain, ThreeWeb

E_INV = math.exp(-1.0)


def _closed_form_line_points(n=20):
    ybar = np.linspace(-1.0, 1.0, n)
    return np.column_stack([(1.0 + ybar) * E_INV, ybar])


def _curved_leaf_points(n=20):
    x = np.linspace(0.0, 1.0, n)
    return np.column_stack([x, 2.0 * np.exp(x - 1.0) - x])


class TestCollinearityResidual:
    def test_closed_form_line_is_flat(self):
        assert collinearity_residual(_closed_form_line_points()) <= 1e-12

    def test_three_points_on_axis(self):
        assert collinearity_residual([(0, 0), (1, 0), (2, 0)]) <= 1e-15

    def test_curved_leaf_scores_high(self):
        assert collinearity_residual(_curved_leaf_points()) > 1e-3

    def test_too_few_points(self):
        with pytest.raises(ValueError, match="at least 3"):
            collinearity_residual([(0, 0), (1, 1)])

    def test_zero_diameter(self):
        with pytest.raises(ValueError, match="diameter"):
            collinearity_residual([(1, 1)] * 5)

    def test_permutation_invariance(self):
        pts = _curved_leaf_points()
        base = collinearity_residual(pts)
        rng = np.random.default_rng(5)
        for _ in range(5):
            shuffled = pts[rng.permutation(len(pts))]
            assert abs(collinearity_residual(shuffled) - base) <= 1e-12

    @given(
        angle=st.floats(0.0, 2 * math.pi),
        tx=st.floats(-5.0, 5.0),
        ty=st.floats(-5.0, 5.0),
    )
    def test_rigid_motion_invariance(self, angle, tx, ty):
        pts = _curved_leaf_points()
        base = collinearity_residual(pts)
        c, s = math.cos(angle), math.sin(angle)
        R = np.array([[c, -s], [s, c]])
        moved = pts @ R.T + np.array([tx, ty])
        assert abs(collinearity_residual(moved) - base) <= 1e-12

    @given(scale=st.floats(1e-3, 1e3))
    def test_scale_invariance(self, scale):
        pts = _curved_leaf_points()
        base = collinearity_residual(pts)
        assert abs(collinearity_residual(pts * scale) - base) <= 1e-12


class TestSeeds:
    def test_band_is_skipped_and_count_met(self, paper_web):
        seeds = diagonal_seeds(paper_web.domain, 7)
        assert len(seeds) == 7
        for s in seeds:
            assert paper_web.domain.admissible(s)
            assert abs(1.0 - s[0] - s[1]) >= 0.05

    def test_deterministic(self, paper_web):
        assert diagonal_seeds(paper_web.domain, 7) == diagonal_seeds(
            paper_web.domain, 7
        )

    def test_plain_box(self, free_box):
        seeds = diagonal_seeds(free_box, 5)
        assert len(seeds) == 5
        # evenly spaced diagonal fractions on [-2,2]^2
        assert seeds[0] == (pytest.approx(-2 + 4 / 6), pytest.approx(-2 + 4 / 6))

    def test_count_validation(self, free_box):
        with pytest.raises(ConfigError):
            diagonal_seeds(free_box, 0)


class TestFoliationLinearity:
    def test_web_leaves_curved_under_identity(self, paper_web):
        rep = foliation_linearity(
            paper_web, 3, None, seeds=[(1.0, 1.0), (0.5, 0.0), (-1.0, 0.5)]
        )
        assert not rep.verdict
        assert rep.max_residual > 1e-3

    def test_web_leaves_straight_under_linearizing_map(self, paper_web):
        rep = foliation_linearity(
            paper_web,
            3,
            linearizing_map(paper_web),
            seeds=[(1.0, 1.0), (0.5, 0.0), (-1.0, 0.5)],
        )
        assert rep.verdict
        assert rep.max_residual <= 1e-9

    def test_vertical_foliation_already_straight(self, paper_web):
        rep = foliation_linearity(paper_web, 1, None, seeds=[(0.3, -0.7), (1.2, 0.1)])
        assert rep.verdict

    def test_bad_seed_attributed(self, paper_web):
        with pytest.raises(TraceError, match=r"F3, seed \(0\.5, 0\.5\)"):
            foliation_linearity(paper_web, 3, None, seeds=[(0.5, 0.5)])

    def test_components_recorded(self, paper_web):
        rep = foliation_linearity(
            paper_web, 1, None, seeds=[(0.0, 0.0), (1.5, 1.5)]
        )
        assert rep.components == (1, -1)  # opposite sides of x+y = 1


class TestVerifyLinearization:
    def test_default_run_passes(self, theorem_report):
        rep = theorem_report
        assert rep.overall_pass
        assert rep.general_position.verdict
        assert rep.diffeo.verdict
        assert all(r.verdict for r in rep.foliations)
        assert rep.line_check is not None and rep.line_check.verdict
        assert rep.line_check.n_leaves == 7

    def test_numerical_headroom_at_tighter_tolerance(self):
        rep = verify_linearization(tol=1e-9)
        assert rep.overall_pass

    def test_identity_fails_only_in_third_foliation(self, identity_report):
        rep = identity_report
        assert not rep.overall_pass
        by_fol = {r.foliation: r for r in rep.foliations}
        assert by_fol[1].verdict and by_fol[2].verdict
        assert not by_fol[3].verdict
        assert by_fol[3].max_residual >= 1e-3
        assert rep.line_check is None

    def test_zero_margin_fails_in_degeneracy_stage_only(self, paper_web):
        web = ThreeWeb(paper_web.foliations, paper_web.domain.with_margin(0.0))
        rep = verify_linearization(web, grid=(33, 33))
        assert not rep.overall_pass
        assert not rep.general_position.verdict
        assert not rep.diffeo.verdict
        # straightness of the images is undamaged
        assert all(r.verdict for r in rep.foliations)
        assert rep.line_check.verdict

    def test_line_formula_values(self, theorem_report):
        # spot-check one F1 trace against the closed-form image line
        t = next(t for t in theorem_report.traces if t.foliation == 1)
        c = t.pre.level
        xbar, ybar = t.post.vertices[:, 0], t.post.vertices[:, 1]
        assert np.abs(xbar - (c + ybar) * math.exp(-c)).max() <= 1e-9


class TestVerifyFamily:
    def test_unit_shear(self):
        rep = verify_family("1", "1")
        assert rep.overall_pass
        t = next(t for t in rep.traces if t.foliation == 1)
        c = t.pre.level
        assert np.abs(
            t.post.vertices[:, 0] - (c + t.post.vertices[:, 1])
        ).max() <= 1e-12

    def test_exponential_member_matches_theorem_run(self, theorem_report):
        dom = Domain(box=(-2, 2, -2, 2), exclude=parse("1-x-y"), margin=0.05)
        rep = verify_family("exp(-x)", "exp(-x)", dom)
        assert rep.overall_pass
        assert rep.to_dict().keys() == theorem_report.to_dict().keys()
        assert [r.verdict for r in rep.foliations] == [
            r.verdict for r in theorem_report.foliations
        ]

    def test_quadratic_member(self):
        rep = verify_family("1+x", "2", Domain(box=(0, 2, -2, 2)))
        assert rep.overall_pass
        t = next(t for t in rep.traces if t.foliation == 1)
        c = t.pre.level
        expected = (1.0 + c) * c + 2.0 * t.post.vertices[:, 1]
        assert np.abs(t.post.vertices[:, 0] - expected).max() <= 1e-9

    def test_general_position_precondition_visible(self):
        # box straddles f_x = 1 + 2x = 0, so the pipeline must not pass
        rep = verify_family("1+x", "2", Domain(box=(-2, 2, -2, 2)))
        assert not rep.overall_pass
        assert not rep.general_position.verdict


class TestVerifyMap:
    def test_identity_linearizes_an_already_linear_web(self, parallel_web):
        rep = verify_map(parallel_web, identity_map())
        assert rep.overall_pass
        assert rep.line_check is None

    def test_identity_fails_on_paper_web(self, paper_web):
        rep = verify_map(paper_web, identity_map())
        assert not rep.overall_pass

    def test_custom_map(self, paper_web):
        rep = verify_map(paper_web, linearizing_map(paper_web))
        assert rep.overall_pass
