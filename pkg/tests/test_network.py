import io
import threading

import numpy as np
import pytest

from fleetsim.grid import GridSpec
from fleetsim.network import (CellNodeIndex, RoutingNetwork, SchemaError,
                              Unreachable, ValidationError, load_network,
                              nearest_node, shortest_path, synth_grid_network)
from util import enumerate_shortest, random_digraph

NODES_CSV = "node_id,x,y\nA,0,0\nB,1,0\n"
EDGES_CSV = "from,to,travel_time_min\nA,B,3.0\n"


class TestLoadNetwork:
    def test_minimal_valid(self):
        net = load_network(io.StringIO(NODES_CSV), io.StringIO(EDGES_CSV))
        assert net.n_nodes == 2
        assert net.edge_count == 1
        assert net.edge_time(net.index_of["A"], net.index_of["B"]) == 3.0

    def test_dangling_edge(self):
        edges = "from,to,travel_time_min\nA,C,1.0\n"
        with pytest.raises(ValidationError):
            load_network(io.StringIO(NODES_CSV), io.StringIO(edges))

    def test_nonpositive_weight(self):
        edges = "from,to,travel_time_min\nA,B,-1.0\n"
        with pytest.raises(ValidationError):
            load_network(io.StringIO(NODES_CSV), io.StringIO(edges))
        edges = "from,to,travel_time_min\nA,B,0.0\n"
        with pytest.raises(ValidationError):
            load_network(io.StringIO(NODES_CSV), io.StringIO(edges))

    def test_duplicate_node_id(self):
        nodes = "node_id,x,y\nA,0,0\nA,1,0\n"
        with pytest.raises(ValidationError):
            load_network(io.StringIO(nodes), io.StringIO(EDGES_CSV))

    def test_malformed_row(self):
        nodes = "node_id,x,y\nA,zero,0\n"
        with pytest.raises(SchemaError):
            load_network(io.StringIO(nodes), io.StringIO(EDGES_CSV))

    def test_wrong_header(self):
        nodes = "id,x,y\nA,0,0\n"
        with pytest.raises(SchemaError):
            load_network(io.StringIO(nodes), io.StringIO(EDGES_CSV))

    def test_file_paths(self, tmp_path):
        np_ = tmp_path / "nodes.csv"
        ep = tmp_path / "edges.csv"
        np_.write_text(NODES_CSV)
        ep.write_text(EDGES_CSV)
        assert load_network(np_, ep).n_nodes == 2


class TestShortestPath:
    def test_identity(self):
        net = load_network(io.StringIO(NODES_CSV), io.StringIO(EDGES_CSV))
        a = net.index_of["A"]
        path = shortest_path(net, a, a)
        assert path.node_sequence == [a]
        assert path.total_time == 0.0

    def test_triangle_hand_enumerated(self):
        # A->B (5) + B->C (5) beats the direct A->C (12)
        nodes = [("A", 0, 0), ("B", 1, 0), ("C", 2, 0)]
        edges = [("A", "B", 5.0), ("B", "C", 5.0), ("A", "C", 12.0)]
        net = RoutingNetwork(nodes, edges)
        path = shortest_path(net, net.index_of["A"], net.index_of["C"])
        assert [net.node_ids[h] for h in path.node_sequence] == ["A", "B", "C"]
        assert path.total_time == 10.0

    def test_unreachable(self):
        nodes = [("A", 0, 0), ("B", 1, 0)]
        net = RoutingNetwork(nodes, [("A", "B", 1.0)])
        with pytest.raises(Unreachable):
            shortest_path(net, net.index_of["B"], net.index_of["A"])

    def test_matches_bruteforce_on_random_digraphs(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            net = random_digraph(rng)
            for o in range(net.n_nodes):
                for d in range(net.n_nodes):
                    expect = enumerate_shortest(net, o, d)
                    if expect is None:
                        with pytest.raises(Unreachable):
                            shortest_path(net, o, d)
                    else:
                        path = shortest_path(net, o, d)
                        assert path.total_time == expect
                        assert sum(path.leg_times) == path.total_time

    def test_triangle_inequality(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            net = random_digraph(rng, n_max=6)
            for a in range(net.n_nodes):
                for b in range(net.n_nodes):
                    for c in range(net.n_nodes):
                        ab = net.travel_time(a, b)
                        bc = net.travel_time(b, c)
                        ac = net.travel_time(a, c)
                        if np.isfinite(ab) and np.isfinite(bc):
                            assert ac <= ab + bc + 1e-12

    def test_directional_asymmetry(self):
        nodes = [("A", 0, 0), ("B", 1, 0)]
        net = RoutingNetwork(nodes, [("A", "B", 2.0), ("B", "A", 9.0)])
        a, b = net.index_of["A"], net.index_of["B"]
        assert net.travel_time(a, b) == 2.0
        assert net.travel_time(b, a) == 9.0

    def test_path_legs_are_edges(self):
        net = synth_grid_network(3, 3, 1.0, 0.5)
        path = shortest_path(net, 0, net.n_nodes - 1)
        for i, t in enumerate(path.leg_times):
            u, v = path.node_sequence[i], path.node_sequence[i + 1]
            assert net.edge_time(u, v) == t

    def test_concurrent_queries_match_serial(self):
        net = synth_grid_network(5, 5, 1.0, 0.5, noise=0.2, seed=3)
        serial = {(o, d): net.travel_time(o, d)
                  for o in range(net.n_nodes) for d in range(net.n_nodes)}
        fresh = synth_grid_network(5, 5, 1.0, 0.5, noise=0.2, seed=3)
        results = {}
        lock = threading.Lock()

        def worker(origin):
            local = {(origin, d): fresh.travel_time(origin, d)
                     for d in range(fresh.n_nodes)}
            with lock:
                results.update(local)

        threads = [threading.Thread(target=worker, args=(o,))
                   for o in range(fresh.n_nodes)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert results == serial


class TestNearestNode:
    def test_strictly_closer(self):
        nodes = [("A", 0, 0), ("B", 2, 0)]
        net = RoutingNetwork(nodes, [("A", "B", 1.0)])
        assert net.node_ids[nearest_node(net, 0.4, 0)] == "A"

    def test_tie_breaks_to_lower_id(self):
        nodes = [("A", 0, 0), ("B", 2, 0)]
        net = RoutingNetwork(nodes, [("A", "B", 1.0)])
        assert net.node_ids[nearest_node(net, 1.0, 0)] == "A"

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(5)
        nodes = [(f"p{i:02d}", float(rng.uniform(0, 10)), float(rng.uniform(0, 10)))
                 for i in range(20)]
        net = RoutingNetwork(nodes, [])
        for _ in range(50):
            x, y = rng.uniform(0, 10, size=2)
            d2 = [(nx - x) ** 2 + (ny - y) ** 2 for _, nx, ny in
                  sorted(nodes, key=lambda n: n[0])]
            assert nearest_node(net, x, y) == int(np.argmin(d2))


class TestSynthGrid:
    def test_single_node(self):
        net = synth_grid_network(1, 1, 1.0, 0.5)
        assert net.n_nodes == 1
        assert net.edge_count == 0

    def test_two_by_two(self):
        net = synth_grid_network(2, 2, 1.0, 0.5)
        assert net.n_nodes == 4
        assert net.edge_count == 8
        for u in range(4):
            for v, w in net.out_edges[u]:
                assert w == 2.0

    def test_seeded_noise_is_deterministic(self):
        a = synth_grid_network(3, 3, 1.0, 0.5, noise=0.3, seed=9)
        b = synth_grid_network(3, 3, 1.0, 0.5, noise=0.3, seed=9)
        assert a.node_ids == b.node_ids
        assert a.out_edges == b.out_edges

    def test_noise_creates_asymmetry(self):
        net = synth_grid_network(2, 2, 1.0, 0.5, noise=0.3, seed=1)
        asym = any(net.edge_time(u, v) != net.edge_time(v, u)
                   for u in range(net.n_nodes) for v, _ in net.out_edges[u])
        assert asym

    def test_invalid_parameters(self):
        with pytest.raises(ValidationError):
            synth_grid_network(0, 2, 1.0, 0.5)
        with pytest.raises(ValidationError):
            synth_grid_network(2, 2, -1.0, 0.5)


class TestCellNodeIndex:
    def test_prefers_node_inside_cell(self):
        # point (0.6, 0.0): nearest node overall sits at x=0.5 in cell 1,
        # but the point belongs to cell 2, whose only node column is x=1.0
        net = synth_grid_network(8, 8, 0.5, 0.25)
        spec = GridSpec(5, 5, -0.25, 3.75, -0.25, 3.75)
        index = CellNodeIndex(net, spec)
        plain = nearest_node(net, 0.6, 0.0)
        assert net.coords[plain][0] == 0.5
        constrained = index.snap(2, 1, 0.6, 0.0)
        assert net.coords[constrained][0] == 1.0

    def test_every_cell_covered_on_canonical_lattice(self):
        net = synth_grid_network(8, 8, 0.5, 0.25)
        spec = GridSpec(5, 5, -0.25, 3.75, -0.25, 3.75)
        index = CellNodeIndex(net, spec)
        for m in range(1, 6):
            for n in range(1, 6):
                assert (m, n) in index.nodes_in_cell

    def test_empty_cell_falls_back_to_global(self):
        nodes = [("A", 0.0, 0.0)]
        net = RoutingNetwork(nodes, [])
        spec = GridSpec(2, 1, 0.0, 2.0, 0.0, 1.0)
        index = CellNodeIndex(net, spec)
        assert index.snap(2, 1, 1.5, 0.5) == 0
