import json

import pytest

from imcflab import counterexample as cx
from imcflab.errors import CertificationFailure, DomainError, InputError
from imcflab.sphere import SphereGrid

G = SphereGrid.full(16)


def test_profile_kinds():
    assert cx.ProfileSpec("zero").fbar(G).values.max() == 0.0
    with pytest.raises(InputError):
        cx.ProfileSpec("cubic")


def test_span_profile_unavailable_in_polar_mode():
    with pytest.raises(InputError):
        cx.ProfileSpec("span", a=(0.2,)).w(SphereGrid.polar(4, 64))


def test_nonpositive_weight_rejected():
    with pytest.raises(DomainError):
        cx.ProfileSpec("p2", eps=5.0).fbar(G)


def test_construct_initial_needs_positive_radius():
    with pytest.raises(DomainError):
        cx.construct_initial(cx.ProfileSpec("p2", eps=0.1), -1.0, G)
    with pytest.raises(DomainError):
        cx.construct_initial(cx.ProfileSpec("p2", eps=0.9), 0.05, G)


def test_span_profile_fails_initial_value_condition():
    report = cx.certify_s0(cx.ProfileSpec("span", a=(0.0, 0.0, 0.3)), 6.0, G)
    assert not report.passed
    assert report.failed_condition == "2_initial_value"


def test_search_stops_on_vanishing_c0():
    with pytest.raises(CertificationFailure) as info:
        cx.search_s0(cx.ProfileSpec("zero"), G)
    assert info.value.condition == "2_initial_value"


def test_certify_s0_passes_for_p2():
    settings = cx.PipelineSettings(probe_time=2.0)
    report = cx.certify_s0(cx.ProfileSpec("p2", eps=0.1), 4.0, G, settings)
    assert report.passed, report.message
    assert report.drift["slope"] == pytest.approx(-1.0, abs=0.3)


def test_report_serialises():
    report = cx.certify_s0(cx.ProfileSpec("zero"), 4.0, G)
    doc = json.loads(report.to_json())
    assert doc["failed_condition"] == "2_initial_value"
    assert "method" in doc


def test_highdim_rejects_n3():
    with pytest.raises(InputError):
        cx.highdim_construct_and_certify(3, cx.ProfileSpec(), 4.0)
