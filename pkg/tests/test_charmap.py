import json

import numpy as np
import pytest
from scipy.interpolate import BSpline

from midpoint.charmap import (
    _de_boor,
    _derivative_nets,
    certify_C1,
    check_control_points,
    cone_test,
    edge_directions,
    evaluate,
    evaluate_derivatives,
    extract_spline_ring,
    in_open_Q,
    jacobian_samples,
    samples_csv,
    samples_obj,
)
from midpoint.errors import DomainError, MidpointError, TooFewRings
from midpoint.ringnet import kind_for_degree, make_grid_mesh, omega
from midpoint.spectral import assemble_matrix, characteristic_mesh

CASES = [(2, 5), (3, 3), (3, 7), (4, 6), (5, 5), (6, 3)]


@pytest.fixture(scope="module", params=CASES, ids=lambda c: f"n{c[0]}m{c[1]}")
def charmap(request):
    n, m = request.param
    cm = characteristic_mesh(n, m)
    return cm, extract_spline_ring(cm.net, n)


def random_points(rng, k):
    """Random parameters in [0,2]^2 minus [0,1)^2."""
    out = []
    while len(out) < k:
        u, v = rng.uniform(0, 2, 2)
        if u >= 1 or v >= 1:
            out.append((u, v))
    return out


@pytest.mark.parametrize("n,m,count", [(2, 5, 15), (3, 4, 12), (6, 3, 81), (6, 5, 135), (7, 3, 81)])
def test_patch_counts(n, m, count):
    cmap = extract_spline_ring(characteristic_mesh(n, m).net, n)
    assert cmap.patch_count == count == 3 * m * (n // 2) ** 2


def test_de_boor_matches_scipy():
    rng = np.random.default_rng(3)
    for n in range(1, 8):
        P = rng.normal(size=n + 1)
        ref = BSpline(np.arange(-n, n + 2, dtype=float), P, n)
        for t in np.linspace(0, 1, 11):
            assert abs(_de_boor(P, t).real - ref(t)) < 1e-14


def test_patches_agree_on_shared_boundaries(charmap):
    _, cmap = charmap
    s = cmap.s
    worst = 0.0
    cells = set(cmap.cells())
    for (a, b) in cells:
        P = cmap.patches[0][(a, b)]
        for t in np.linspace(0, 1, 5):
            if (a + 1, b) in cells:
                Q = cmap.patches[0][(a + 1, b)]
                worst = max(worst, abs(complex(_de_boor(_de_boor(P, 1.0), t)) - complex(_de_boor(_de_boor(Q, 0.0), t))))
            if (a, b + 1) in cells:
                Q = cmap.patches[0][(a, b + 1)]
                worst = max(worst, abs(complex(_de_boor(_de_boor(P, t), 1.0)) - complex(_de_boor(_de_boor(Q, t), 0.0))))
    assert worst < 1e-12
    # across segments the chart edges u = 0 and v = 0 are glued
    for l in range(cmap.m):
        for v in np.linspace(1, 2, 5):
            assert abs(evaluate(cmap, l, 0, v) - evaluate(cmap, l + 1, v, 0)) < 1e-12
    assert s >= 1


def test_normalised_rotation_and_equivariance(charmap):
    _, cmap = charmap
    c11 = evaluate(cmap, 0, 1, 1)
    assert c11.real > 0 and abs(c11.imag) < 1e-12
    zeta = np.exp(2j * np.pi / cmap.m)
    for l in range(cmap.m):
        for u, v in [(1.3, 1.7), (0.2, 1.9), (1.99, 0.01)]:
            assert abs(evaluate(cmap, l + 1, u, v) - zeta * evaluate(cmap, l, u, v)) < 1e-12


def test_derivatives_match_finite_differences(charmap):
    _, cmap = charmap
    rng = np.random.default_rng(cmap.n * 7 + cmap.m)
    h = 1e-6
    for u, v in random_points(rng, 20):
        # stay inside one cell so the central difference is smooth
        u = min(max(u, 0.01), 1.99) if v >= 1 else min(max(u, 1.01), 1.99)
        v = min(max(v, 0.01), 1.99) if u >= 1 else min(max(v, 1.01), 1.99)
        cu, cv = evaluate_derivatives(cmap, 0, u, v)
        fu = (evaluate(cmap, 0, u + h, v) - evaluate(cmap, 0, u - h, v)) / (2 * h)
        fv = (evaluate(cmap, 0, u, v + h) - evaluate(cmap, 0, u, v - h)) / (2 * h)
        assert abs(cu - fu) <= 1e-6 * max(1.0, abs(cu))
        assert abs(cv - fv) <= 1e-6 * max(1.0, abs(cv))


def test_diagonal_reflection_of_derivatives(charmap):
    _, cmap = charmap
    for u, v in [(1.2, 0.4), (1.5, 1.5), (0.3, 1.8), (2.0, 1.0)]:
        cu, _ = evaluate_derivatives(cmap, 0, u, v)
        _, cv = evaluate_derivatives(cmap, 0, v, u)
        assert abs(cu - np.conj(cv)) < 1e-12


def test_cv_in_open_quadrant_at_random_points(charmap):
    _, cmap = charmap
    rng = np.random.default_rng(11)
    vals = [evaluate_derivatives(cmap, 0, u, v)[1] for u, v in random_points(rng, 64)]
    assert in_open_Q(vals).all()


def test_jacobian_positive(charmap):
    _, cmap = charmap
    assert (jacobian_samples(cmap, 17) > 0).all()


def test_cone_test_passes(charmap):
    _, cmap = charmap
    res = cone_test(cmap)
    assert res.passed and res.margin > 0 and not res.witnesses


def test_characteristic_mesh_edges_in_Q(charmap):
    cm, _ = charmap
    assert edge_directions(cm.net).in_Q()
    flipped = cm.net.with_points(np.conj(cm.net.points))
    assert not edge_directions(flipped).in_Q()


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_regular_grid_edges_in_Q(n):
    g = make_grid_mesh(4, 1, kind_for_degree(n), omega(n) + 2)
    assert edge_directions(g).in_Q()


def test_negated_control_point_is_one_witness():
    cm = characteristic_mesh(3, 5)
    nets = list(_derivative_nets(extract_spline_ring(cm.net, 3)))
    assert check_control_points(nets)[0] == []
    key, D = nets[2]
    D = D.copy()
    D[1, 1] = -D[1, 1]
    nets[2] = (key, D)
    witnesses, margin = check_control_points(nets)
    assert len(witnesses) == 1 and witnesses[0][:2] == (key, (1, 1))
    assert margin < 0


def test_domain_errors(charmap):
    _, cmap = charmap
    for u, v in [(0.5, 0.5), (2.1, 1.0), (-0.1, 1.5), (1.0, 2.5)]:
        with pytest.raises(DomainError):
            evaluate(cmap, 0, u, v)


def test_extract_needs_enough_rings():
    with pytest.raises(TooFewRings):
        extract_spline_ring(make_grid_mesh(5, 1, "primal", 2), 5)


@pytest.mark.parametrize("n,m", [(2, 5), (3, 6), (4, 3)])
def test_map_of_subdivided_mesh_is_scaled(n, m):
    cm = characteristic_mesh(n, m)
    S = assemble_matrix(n, m)
    a = extract_spline_ring(cm.net, n)
    b = extract_spline_ring(cm.net.with_points(S.entries @ cm.net.points), n)
    for u, v in [(1.0, 1.0), (1.5, 0.4), (0.2, 1.9), (2.0, 2.0)]:
        assert abs(evaluate(b, 0, u, v) - cm.lam * evaluate(a, 0, u, v)) < 1e-9


def test_certificate():
    cert = certify_C1(3, 5)
    assert cert.verdict == "pass" and all(cert.checks.values())
    assert cert.values["patches"] == 15
    doc = json.loads(cert.to_json(timestamps=False))
    assert "started" not in doc and doc["values"]["mult_alg"] == 2
    assert "elapsed" in json.loads(cert.to_json())
    with pytest.raises(MidpointError):
        certify_C1(1, 5)


def test_sample_exports():
    cmap = extract_spline_ring(characteristic_mesh(2, 3).net, 2)
    rows = samples_csv(cmap, per_patch=3).splitlines()
    assert rows[0] == "u,v,segment,re,im" and len(rows) == 1 + cmap.patch_count * 9
    obj = samples_obj(cmap, per_patch=3)
    assert obj.count("\nv ") + obj.startswith("v ") == cmap.patch_count * 9
    assert sum(1 for line in obj.splitlines() if line.startswith("f ")) == cmap.patch_count * 4
