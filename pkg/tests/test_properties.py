"""Randomised invariants of the kernel, the ringnet operator and the spectra."""

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from midpoint.mesh import build_mesh, midpoint_Mn
from midpoint.ringnet import (
    Ringnet,
    frame_K,
    half_segment,
    _half_segment_index,
    kind_for_degree,
    make_grid_mesh,
    max_norm,
    min_max_norm,
    net_labels,
    omega,
    rho,
    subdivide_ringnet,
    symmetric_net,
    symmetry_check,
)
from midpoint.spectral import _align_reflection, _symmetrizer, assemble_matrix, dominant_pair_per_frequency, frequency_blocks
from midpoint.stencil import regular_mask

from conftest import CUBE_F, CUBE_V

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

degrees = st.integers(1, 6)
valences = st.integers(3, 8)
seeds = st.integers(0, 2**32 - 1)


def freq_for(m):
    return st.integers(1, m // 2)


def half_size(m, kind, j):
    return len(_half_segment_index(m, kind, j)[0])


@SETTINGS
@given(n=degrees, seed=seeds)
def test_kernel_is_affine_invariant(n, seed):
    rng = np.random.default_rng(seed)
    L = rng.normal(size=(3, 3))
    assume(abs(np.linalg.det(L)) > 0.1)
    t = rng.normal(size=3)
    base = build_mesh(CUBE_V, CUBE_F)
    moved = build_mesh([tuple(L @ v + t) for v in np.array(CUBE_V, float)], CUBE_F)
    a = midpoint_Mn(base, n).vertices @ L.T + t
    b = midpoint_Mn(moved, n).vertices
    assert np.abs(a - b).max() < 1e-12 * max(1.0, np.abs(b).max())


@SETTINGS
@given(st.data())
def test_symmetry_is_preserved(data):
    n = data.draw(degrees)
    m = data.draw(valences)
    f = data.draw(freq_for(m))
    kind = kind_for_degree(n)
    j = omega(n) + 1
    size = half_size(m, kind, j)
    rng = np.random.default_rng(data.draw(seeds))
    half = rng.normal(size=size) + 1j * rng.normal(size=size)
    net = symmetric_net(m, kind, j, f, half)
    assert symmetry_check(net, f) == {"rotation": True, "reflection": True}
    assert symmetry_check(subdivide_ringnet(net, n), f, tol=1e-12) == {"rotation": True, "reflection": True}


def _sector_net(m, f, kind, j, rng):
    """Symmetric net whose H-points are non-negative combinations of 1 and e^{i phi/2}."""
    phi = 2 * np.pi * f / m
    size = half_size(m, kind, j)
    a, b = rng.uniform(0, 1, size), rng.uniform(0, 1, size)
    return symmetric_net(m, kind, j, f, a + b * np.exp(0.5j * phi)), phi


@SETTINGS
@given(st.data())
def test_positional_invariance(data):
    n = data.draw(degrees)
    m = data.draw(valences)
    f = data.draw(freq_for(m))
    assume(2 * f < m)  # phi < pi
    kind = kind_for_degree(n)
    net, phi = _sector_net(m, f, kind, omega(n) + 1, np.random.default_rng(data.draw(seeds)))
    ang = np.angle(half_segment(subdivide_ringnet(net, n)))
    h = np.abs(half_segment(subdivide_ringnet(net, n)))
    ang = ang[h > 1e-12]
    assert (ang >= -1e-12).all() and (ang <= phi / 2 + 1e-12).all()


@SETTINGS
@given(st.data())
def test_order_preservation(data):
    n = data.draw(degrees)
    m = data.draw(valences)
    f = data.draw(freq_for(m))
    assume(2 * f < m)
    kind = kind_for_degree(n)
    j = omega(n) + 1
    fr = frame_K(2 * np.pi * f / m)
    size = half_size(m, kind, j)
    rng = np.random.default_rng(data.draw(seeds))
    d = symmetric_net(m, kind, j, f, fr.point(rng.uniform(0, 1, (size, 2))))
    # the projection onto the symmetric subspace may move diagonal points off K
    assume((fr.coords(half_segment(d)) >= -1e-12).all())
    out = fr.coords(half_segment(subdivide_ringnet(d, n)))
    assert (out >= -1e-12 * max(1.0, np.abs(out).max())).all()


@SETTINGS
@given(n=st.integers(2, 6), m=valences, seed=seeds)
def test_matrix_agrees_with_operator(n, m, seed):
    S = assemble_matrix(n, m)
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=S.size) + 1j * rng.normal(size=S.size)
    net = Ringnet(m, S.kind, S.j, pts)
    assert np.abs(subdivide_ringnet(net, n).points - S.entries @ pts).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 6), m=valences)
def test_symmetric_eigennets_have_real_eigenvalues(n, m):
    S = assemble_matrix(n, m)
    blocks = frequency_blocks(S)
    checked = 0
    for f in range(1, m // 2 + 1):
        vals, vecs = np.linalg.eig(blocks[f])
        order = np.argsort(-np.abs(vals))
        for k in order:
            if abs(vals[k]) < 1e-8:
                continue
            net = _align_reflection(blocks.expand(f, vecs[:, k]))
            if symmetry_check(net, f, tol=1e-8)["reflection"]:
                assert abs(vals[k].imag) < 1e-9
                checked += 1
        # the dominant eigennet of each frequency is reflection symmetric
        lam, top = dominant_pair_per_frequency(blocks, f)
        assert abs(lam.imag) < 1e-9
        assert symmetry_check(top, f, tol=1e-8)["reflection"]
    assert checked >= m // 2


def _ratios(n, m, f, steps):
    """MIN/MAX along normalised iterates of the frequency-f grid mesh on rho-nets."""
    kind = kind_for_degree(n)
    j = rho(n)
    net = make_grid_mesh(m, f, kind, j + 1)
    fr = frame_K(net.phi)
    E = assemble_matrix(n, m).entries
    # projection keeps rounding noise in other frequencies from growing
    project = _symmetrizer(m, kind, j, f)
    out = []
    for _ in range(steps):
        lo, hi = min_max_norm(net, fr)
        out.append(lo / hi)
        net = net.with_points(project(E @ net.points) / hi)
    return out


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_min_max_ratio_bounded_along_iterates(data):
    n = data.draw(st.integers(2, 6))
    m = data.draw(valences)
    f = data.draw(freq_for(m))
    assume(2 * f < m)
    r = rho(n) + 2
    ratios = _ratios(n, m, f, 150)
    limit = ratios[-1]
    assert abs(ratios[-1] - ratios[-2]) < 1e-9
    nu = min(min(ratios[:r]), limit)
    assert nu > 0
    assert min(ratios) >= nu - 1e-9


@pytest.mark.xfail(strict=True, reason="the ratio can keep falling after the first r iterates; only min(nu, limit) bounds it (see ledger)")
@pytest.mark.parametrize("n,m,f", [(2, 3, 1), (3, 3, 1), (2, 5, 2)])
def test_min_max_ratio_bounded_by_first_iterates(n, m, f):
    r = rho(n) + 2
    ratios = _ratios(n, m, f, 60)
    assert min(ratios) >= min(ratios[:r]) - 1e-12


@settings(max_examples=9, deadline=None)
@given(n=st.integers(1, 9))
def test_regular_stencils_are_convex(n):
    for _, entries in regular_mask(n).items():
        ws = [w for _, w in entries]
        assert sum(ws) == 1 and all(w > 0 for w in ws)
