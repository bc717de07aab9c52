import json

import numpy as np
import pytest

from midpoint.errors import (
    AngleOutOfRange,
    BadFrequency,
    BadValence,
    ParityMismatch,
    TooFewRings,
    TopologyMismatch,
)
from midpoint.ringnet import (
    NetOrder,
    Ringnet,
    compare_nets,
    core_mesh,
    frame_K,
    half_segment,
    half_segment_labels,
    h_coordinates_csv,
    influence_range,
    kind_for_degree,
    make_grid_mesh,
    min_max_norm,
    net_labels,
    omega,
    rho,
    subdivide_ringnet,
    symmetric_net,
    symmetry_check,
)


def test_degree_parameters():
    assert [omega(n) for n in range(1, 10)] == [0, 0, 1, 1, 2, 2, 3, 3, 4]
    assert [rho(n) for n in range(1, 8)] == [0, 2, 3, 5, 6, 8, 9]
    assert kind_for_degree(3) == "primal" and kind_for_degree(4) == "dual"


def test_grid_mesh_formulas():
    g = make_grid_mesh(4, 1, "primal", 3)
    assert g.at(0, 1, 0) == 1
    assert np.isclose(g.at(0, 0, 1), 1j)
    assert np.isclose(g.at(0, 1, 1), 1 + 1j)
    d = make_grid_mesh(4, 1, "dual", 2)
    assert np.isclose(d.at(0, 1, 1), (1 + 1j) / 2)
    assert np.isclose(make_grid_mesh(5, 2, "primal", 2).phi, 4 * np.pi / 5)


def test_grid_mesh_errors():
    with pytest.raises(BadFrequency):
        make_grid_mesh(5, 0, "primal", 2)
    with pytest.raises(BadFrequency):
        make_grid_mesh(5, 5, "primal", 2)
    with pytest.raises(BadValence):
        make_grid_mesh(2, 1, "primal", 2)
    with pytest.raises(TooFewRings):
        make_grid_mesh(5, 1, "primal", 0)


def test_label_structure():
    labs = net_labels(5, "primal", 2)
    assert labs[0] == (0, 0, 0) and len(labs) == 1 + 5 * 2 + 5 * 4
    assert all(j >= 0 and i >= 1 for _, i, j in labs[1:])
    dual = net_labels(5, "dual", 1)
    assert len(dual) == 5 + 5 * 3
    # the spoke vertex g_0j^l is stored once, in segment l+1
    g = make_grid_mesh(5, 1, "primal", 3)
    assert g.index(0, 0, 2) == g.index(1, 2, 0)
    # smaller nets are prefixes
    assert net_labels(6, "dual", 3)[: len(net_labels(6, "dual", 2))] == net_labels(6, "dual", 2)


def test_influence_range_and_core():
    assert influence_range(3, 1, "primal") == (0, 4)
    assert influence_range(2, 1, "dual") == (1, 4)
    with pytest.raises(ParityMismatch):
        influence_range(3, 1, "dual")
    g = make_grid_mesh(5, 1, "dual", 3)
    assert core_mesh(g, 2).j == 0 and len(core_mesh(g, 2).points) == 5
    assert core_mesh(make_grid_mesh(5, 1, "primal", 4), 3).j == 1
    assert omega(7) == 3
    with pytest.raises(TooFewRings):
        core_mesh(make_grid_mesh(5, 1, "primal", 2), 7)


def test_frame_k():
    fr = frame_K(np.pi)
    assert np.isclose(fr.theta, 0) and np.allclose(fr.basis, np.eye(2))
    fr = frame_K(np.pi / 2)
    assert np.allclose(fr.basis, [[np.sqrt(2) / 2, -np.sqrt(2) / 2], [0, 1]])
    for phi in (0.3, 1.0, 2.0, 3.0, 5.0):
        fr = frame_K(phi)
        b1, b2 = fr.basis
        s05 = np.array([np.cos(phi / 2), np.sin(phi / 2)])
        assert abs(b1 @ s05) < 1e-15 and abs(b2 @ [1.0, 0.0]) < 1e-15
        z = np.array([0.3 + 0.7j, -1.2 + 0.1j])
        assert np.allclose(fr.point(fr.coords(z)), z)
    for bad in (0.0, 2 * np.pi, -1.0):
        with pytest.raises(AngleOutOfRange):
            frame_K(bad)


def test_half_segment():
    assert half_segment_labels(make_grid_mesh(5, 1, "primal", 2)) == ((0, 1, 0), (0, 1, 1))
    d = half_segment_labels(make_grid_mesh(5, 1, "dual", 2))
    assert d[0] == (0, 1, 1) and all(i >= j for _, i, j in d)
    sizes = {len(half_segment(make_grid_mesh(6, f, "dual", 4))) for f in (1, 2, 3)}
    assert len(sizes) == 1


@pytest.mark.parametrize("m,f", [(3, 1), (5, 2), (6, 3), (7, 1)])
@pytest.mark.parametrize("kind", ["primal", "dual"])
def test_grid_mesh_symmetric(m, f, kind):
    g = make_grid_mesh(m, f, kind, 3)
    assert symmetry_check(g, f) == {"rotation": True, "reflection": True}
    pts = g.points.copy()
    pts[-1] += 1e-6
    assert not symmetry_check(g.with_points(pts), f)["rotation"]
    assert not symmetry_check(g.with_points(g.points * np.exp(0.4j)), f)["reflection"]


def test_compare_nets():
    g = make_grid_mesh(5, 1, "primal", 3)
    fr = frame_K(g.phi)
    assert compare_nets(g, g, fr) is NetOrder.EQUAL
    assert compare_nets(g.with_points(2 * g.points), g, fr) is NetOrder.GREATER
    assert compare_nets(g, g.with_points(2 * g.points), fr) is NetOrder.LESS
    h = symmetric_net(5, "primal", g.j, 1, fr.point(fr.coords(half_segment(g)) * [[0.5, 2.0]]))
    assert compare_nets(g, h, fr) is NetOrder.INCOMPARABLE
    with pytest.raises(TopologyMismatch):
        compare_nets(g, make_grid_mesh(5, 1, "primal", 2), fr)


def test_min_max_norm():
    fr = frame_K(2 * np.pi / 5)
    net = symmetric_net(5, "dual", 0, 1, fr.point([[3.0, -4.0]]))
    # the single H-vertex sits on the diagonal spoke, so recompute its coordinates
    c = fr.coords(half_segment(net))[0]
    lo, hi = min_max_norm(net, fr)
    assert lo == hi == max(abs(c))
    g = make_grid_mesh(7, 2, "primal", 4)
    lo, hi = min_max_norm(g, frame_K(g.phi))
    assert hi >= lo >= 0


def test_min_max_single_vertex_value():
    fr = frame_K(np.pi / 2)
    z = fr.point([[3.0, -4.0]])
    assert np.allclose(np.abs(fr.coords(z)).max(axis=1), 4.0)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6, 7])
@pytest.mark.parametrize("m", [3, 4, 5])
def test_padding_independence(n, m):
    rng = np.random.default_rng(n * 10 + m)
    kind = kind_for_degree(n)
    j = omega(n) + 1
    size = len(net_labels(m, kind, j))
    net = Ringnet(m, kind, j, rng.normal(size=size) + 1j * rng.normal(size=size))
    a = subdivide_ringnet(net, n, pad=2)
    b = subdivide_ringnet(net, n, pad=4)
    extra = len(net_labels(m, kind, j + 2)) - size
    c = subdivide_ringnet(net, n, pad=2, fill=rng.normal(size=extra) * 100)
    assert np.abs(a.points - b.points).max() < 1e-14
    assert np.abs(a.points - c.points).max() < 1e-14


def test_subdivide_preconditions():
    with pytest.raises(ParityMismatch):
        subdivide_ringnet(make_grid_mesh(5, 1, "primal", 3), 2)
    with pytest.raises(TooFewRings):
        subdivide_ringnet(make_grid_mesh(5, 1, "primal", 1), 5)


def test_regular_grid_mesh_halves():
    g = make_grid_mesh(4, 1, "primal", 4)
    out = subdivide_ringnet(g, 3)
    assert np.allclose(out.points, g.points / 2, atol=1e-14)


def test_json_roundtrip_and_csv():
    g = make_grid_mesh(5, 2, "dual", 3)
    back = Ringnet.from_json(json.dumps(g.to_dict()))
    assert back.same_topology(g) and np.array_equal(back.points, g.points) and back.f == 2
    doc = g.to_dict()
    assert doc["rings"] == 3 and set(doc["vertices"][0]) == {"l", "i", "j", "re", "im"}
    text = h_coordinates_csv(g)
    assert text.splitlines()[0] == "l,i,j,x,y"
    assert len(text.splitlines()) == 1 + len(half_segment(g))
