import numpy as np
import pytest

from curvemeas import (
    DegenerateRadiusError,
    EmbeddedGraph,
    InputFormatError,
    ball_length,
    graph_to_svg,
    hausdorff_distance,
    load_graph,
    minimum_spanning_tree,
    project,
    project_many,
    sample_arclength,
    save_graph,
    sphere_crossings,
    total_length,
)

from oracles import all_labeled_trees, ball_length_brute, brute_projection, tree_length


def unit_segment():
    return EmbeddedGraph(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[0, 1]]))


def y_graph():
    # three unit edges meeting at the origin
    V = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    E = np.array([[0, 1], [0, 2], [0, 3]])
    return EmbeddedGraph(V, E)


class TestConstruction:
    def test_valid_graph(self):
        g = y_graph()
        assert g.n_vertices == 4
        assert g.n_edges == 3
        assert g.dimension == 2
        assert np.allclose(g.edge_lengths(), 1.0)
        assert total_length(g) == pytest.approx(3.0, abs=1e-15)

    def test_singleton(self):
        g = EmbeddedGraph(np.array([[2.0, 3.0]]), np.zeros((0, 2), dtype=int), singleton=True)
        assert g.singleton
        assert total_length(g) == 0.0
        assert g.diameter_upper() == 0.0

    def test_singleton_flag_required(self):
        with pytest.raises(ValueError):
            EmbeddedGraph(np.array([[0.0, 0.0]]), np.zeros((0, 2), dtype=int))

    def test_disconnected_rejected(self):
        V = np.array([[0.0], [1.0], [5.0], [6.0]])
        E = np.array([[0, 1], [2, 3]])
        with pytest.raises(ValueError, match="not connected"):
            EmbeddedGraph(V, E)

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError, match="self-loop"):
            EmbeddedGraph(np.array([[0.0], [1.0]]), np.array([[0, 0], [0, 1]]))

    def test_duplicate_edge_rejected(self):
        # same pair in either orientation is a duplicate
        with pytest.raises(ValueError, match="duplicate"):
            EmbeddedGraph(np.array([[0.0], [1.0]]), np.array([[0, 1], [1, 0]]))

    def test_zero_length_edge_rejected(self):
        V = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
        with pytest.raises(ValueError, match="zero-length"):
            EmbeddedGraph(V, np.array([[0, 1], [1, 2]]))

    def test_edge_index_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            EmbeddedGraph(np.array([[0.0], [1.0]]), np.array([[0, 2]]))

    def test_with_vertices_keeps_topology(self):
        g = unit_segment()
        g2 = g.with_vertices(np.array([[0.0, 0.0], [2.0, 0.0]]))
        assert total_length(g2) == 2.0
        assert np.array_equal(g2.edges, g.edges)


class TestProjection:
    def test_onto_segment_interior(self):
        g = unit_segment()
        r = project(g, [0.3, 0.7])
        assert r.edge_index == 0
        assert r.param == pytest.approx(0.3, abs=1e-12)
        assert np.allclose(r.point, [0.3, 0.0])
        assert r.distance == pytest.approx(0.7, abs=1e-12)

    def test_clamps_to_endpoint(self):
        g = unit_segment()
        r = project(g, [2.0, 1.0])
        assert r.param == 1.0
        assert np.allclose(r.point, [1.0, 0.0])
        assert r.distance == pytest.approx(np.sqrt(2), abs=1e-12)

    def test_tie_goes_to_smallest_edge_index(self):
        g = y_graph()
        # equidistant from edges 0 and 1
        r = project(g, [0.5, 0.5])
        assert r.edge_index == 0

    def test_singleton_projection(self):
        g = EmbeddedGraph(np.array([[1.0, 1.0]]), np.zeros((0, 2), dtype=int), singleton=True)
        r = project(g, [4.0, 5.0])
        assert r.edge_index == -1
        assert r.distance == 5.0

    def test_matches_dense_sampling(self):
        rng = np.random.default_rng(42)
        for trial in range(10):
            V = rng.standard_normal((5, 2))
            g = minimum_spanning_tree(V)
            x = rng.standard_normal(2) * 2
            r = project(g, x)
            brute = brute_projection(g.vertices, g.edges, x)
            assert r.distance == pytest.approx(brute, abs=1e-6)
            # returned point realizes the distance
            assert np.linalg.norm(r.point - x) == pytest.approx(r.distance, abs=1e-12)

    def test_project_many_agrees_with_project(self):
        rng = np.random.default_rng(5)
        g = minimum_spanning_tree(rng.standard_normal((6, 3)))
        X = rng.standard_normal((20, 3))
        dists = project_many(g, X)
        assert dists.shape == (20,)
        for x, d in zip(X, dists):
            assert d == pytest.approx(project(g, x).distance, abs=1e-12)


class TestSampling:
    def test_sample_arclength_spacing(self):
        g = unit_segment()
        pts = sample_arclength(g, 0.25)
        assert pts.shape[1] == 2
        # every sample on the segment
        assert np.all(pts[:, 1] == 0)
        assert pts[:, 0].min() >= -1e-12 and pts[:, 0].max() <= 1 + 1e-12
        # spacing bounded by the step
        xs = np.sort(pts[:, 0])
        assert np.diff(xs).max() <= 0.25 + 1e-12

    def test_sample_includes_endpoints(self):
        g = unit_segment()
        pts = sample_arclength(g, 0.3)
        assert np.any(np.all(np.isclose(pts, [0.0, 0.0]), axis=1))
        assert np.any(np.all(np.isclose(pts, [1.0, 0.0]), axis=1))

    def test_bad_step(self):
        with pytest.raises(ValueError):
            sample_arclength(unit_segment(), 0.0)


class TestHausdorff:
    def test_identical_graphs(self):
        g = y_graph()
        assert hausdorff_distance(g, g, 0.01) <= 0.01

    def test_translated_segment(self):
        a = unit_segment()
        b = a.with_vertices(a.vertices + [0.0, 0.5])
        d = hausdorff_distance(a, b, 0.001)
        assert d == pytest.approx(0.5, abs=0.01)

    def test_subset_asymmetry_resolved(self):
        # distance is symmetric even when one graph contains the other
        a = unit_segment()
        V = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
        b = EmbeddedGraph(V, np.array([[0, 1], [1, 2]]))
        d = hausdorff_distance(a, b, 0.001)
        assert d == pytest.approx(1.0, abs=0.01)
        assert hausdorff_distance(b, a, 0.001) == pytest.approx(d, abs=0.01)


class TestBallGeometry:
    def test_ball_length_segment_center(self):
        g = unit_segment()
        # ball of radius 0.25 at the midpoint covers length 0.5
        assert ball_length(g, [0.5, 0.0], 0.25) == pytest.approx(0.5, abs=1e-12)

    def test_ball_length_off_axis(self):
        g = unit_segment()
        # chord of a radius-r ball at height h has length 2*sqrt(r^2-h^2)
        r, h = 0.5, 0.3
        expected = 2 * np.sqrt(r * r - h * h)
        assert ball_length(g, [0.5, h], r) == pytest.approx(expected, abs=1e-12)

    def test_ball_length_matches_brute(self):
        rng = np.random.default_rng(17)
        for trial in range(8):
            g = minimum_spanning_tree(rng.standard_normal((5, 2)))
            c = rng.standard_normal(2)
            r = rng.uniform(0.2, 1.0)
            exact = ball_length(g, c, r)
            brute = ball_length_brute(g.vertices, g.edges, c, r, 40001)
            assert exact == pytest.approx(brute, abs=2e-4 * total_length(g))

    def test_ball_radius_positive(self):
        with pytest.raises(ValueError):
            ball_length(unit_segment(), [0.0, 0.0], 0.0)

    def test_sphere_crossings_segment(self):
        g = unit_segment()
        assert sphere_crossings(g, [0.5, 0.0], 0.25) == 2
        assert sphere_crossings(g, [0.0, 0.0], 0.5) == 1
        assert sphere_crossings(g, [0.5, 1.0], 0.3) == 0

    def test_sphere_crossings_y_graph(self):
        g = y_graph()
        assert sphere_crossings(g, [0.0, 0.0], 0.5) == 3

    def test_degenerate_radius_flagged(self):
        g = unit_segment()
        # sphere through the far vertex
        with pytest.raises(DegenerateRadiusError):
            sphere_crossings(g, [0.0, 0.0], 1.0)
        # sphere tangent to the edge from above
        with pytest.raises(DegenerateRadiusError):
            sphere_crossings(g, [0.5, 0.5], 0.5)


class TestMST:
    def test_collinear_points(self):
        g = minimum_spanning_tree(np.array([[0.0], [2.0], [1.0]]))
        assert g.n_edges == 2
        assert total_length(g) == pytest.approx(2.0, abs=1e-12)

    def test_single_point_singleton(self):
        g = minimum_spanning_tree(np.array([[1.0, 2.0]]))
        assert g.singleton

    def test_minimal_among_all_trees(self):
        """Exhaustive check: no labeled tree on the same points is shorter."""
        rng = np.random.default_rng(23)
        for trial in range(6):
            pts = rng.standard_normal((5, 2))
            g = minimum_spanning_tree(pts)
            ours = total_length(g)
            best = min(tree_length(pts, edges) for edges in all_labeled_trees(5))
            assert ours == pytest.approx(best, rel=1e-12)


class TestIO:
    def test_round_trip(self, tmp_path):
        g = y_graph()
        path = tmp_path / "g.json"
        save_graph(g, path)
        back = load_graph(path)
        assert np.array_equal(back.vertices, g.vertices)
        assert np.array_equal(back.edges, g.edges)
        assert back.singleton == g.singleton

    def test_singleton_round_trip(self, tmp_path):
        g = EmbeddedGraph(np.array([[5.0]]), np.zeros((0, 2), dtype=int), singleton=True)
        path = tmp_path / "s.json"
        save_graph(g, path)
        back = load_graph(path)
        assert back.singleton
        assert np.array_equal(back.vertices, g.vertices)

    def test_load_dict(self):
        g = load_graph({"vertices": [[0.0], [1.0]], "edges": [[0, 1]]})
        assert g.n_edges == 1

    def test_bad_spec_raises_input_error(self):
        with pytest.raises(InputFormatError):
            load_graph({"vertices": [[0.0], [1.0]]})
        with pytest.raises(InputFormatError):
            load_graph({"vertices": [[0.0], [1.0]], "edges": [[0, 5]]})

    def test_missing_file(self):
        with pytest.raises(InputFormatError, match="no such file"):
            load_graph("/nonexistent/graph.json")

    def test_svg_smoke(self):
        svg = graph_to_svg(y_graph())
        assert svg.startswith("<svg")
        assert "<line" in svg

    def test_svg_rejects_high_dimension(self):
        g = minimum_spanning_tree(np.random.default_rng(0).standard_normal((4, 3)))
        with pytest.raises(ValueError):
            graph_to_svg(g)
