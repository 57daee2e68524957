import math

import networkx as nx
import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import pearsonr, rankdata

from conftest import make_instance, zero_a
from qaplon.lon import Lon, extract_lon, read_lon, write_lon
from qaplon.metrics import (
    Partition,
    clustering_coefficient,
    compute_all,
    disparity,
    fitness_fitness_correlation,
    mcl_cluster,
    modularity,
    neighbor_fitness,
    node_disparity,
    path_length_to_optimum,
)


def make_lon(W, fitness=None):
    W = np.asarray(W, dtype=float)
    k = W.shape[0]
    fitness = np.arange(k, 0, -1) if fitness is None else np.asarray(fitness)
    perms = np.tile(np.arange(3), (k, 1))
    return Lon(n=3, perms=perms, fitness=fitness, basin_size=np.ones(k, dtype=np.int64),
               weights=sp.csr_matrix(W))


def undirected(edges, k, w=1.0):
    W = np.zeros((k, k))
    for a, b in edges:
        W[a, b] = W[b, a] = w
    return W


def random_two_component_graph(rng):
    sizes = rng.integers(2, 9, size=2)
    k = int(sizes.sum())
    W = np.zeros((k, k))
    blocks = [range(0, sizes[0]), range(sizes[0], k)]
    for block in blocks:
        nodes = list(block)
        for a in nodes:  # keep every component connected
            for b in nodes:
                if a != b and (abs(a - b) == 1 or rng.random() < 0.5):
                    W[a, b] = rng.random() + 0.01
    perm = rng.permutation(k)
    return W[np.ix_(perm, perm)], (perm >= sizes[0]).astype(np.int64)


class TestClustering:
    def test_complete_graph(self):
        assert clustering_coefficient(make_lon(undirected([(a, b) for a in range(4) for b in range(a + 1, 4)], 4))) == 1.0

    def test_star(self):
        assert clustering_coefficient(make_lon(undirected([(0, k) for k in range(1, 6)], 6))) == 0.0

    def test_triangle_with_pendant(self):
        W = undirected([(0, 1), (1, 2), (0, 2), (2, 3)], 4)
        assert clustering_coefficient(make_lon(W)) == pytest.approx(7 / 9, abs=1e-15)

    def test_no_qualifying_node(self):
        assert math.isnan(clustering_coefficient(make_lon(undirected([(0, 1)], 3))))

    def test_direction_and_loops_ignored(self):
        W = np.array([[0.5, 0.5, 0], [0, 0.2, 0.8], [0.3, 0, 0.7]])
        assert clustering_coefficient(make_lon(W)) == 1.0

    @given(st.integers(0, 10**6))
    def test_networkx_oracle(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(3, 15))
        W = np.where(rng.random((k, k)) < 0.3, rng.random((k, k)), 0.0)
        g = nx.Graph()
        g.add_nodes_from(range(k))
        g.add_edges_from((a, b) for a, b in zip(*np.nonzero(W)) if a != b)
        local = nx.clustering(g)
        qual = [local[v] for v in g if g.degree(v) >= 2]
        got = clustering_coefficient(make_lon(W))
        if qual:
            assert got == pytest.approx(np.mean(qual), abs=1e-12)
        else:
            assert math.isnan(got)


class TestPathLength:
    def test_single_edge(self):
        lon = make_lon([[0.5, 0.5], [0, 1]], fitness=[5, 1])
        assert path_length_to_optimum(lon) == (2.0, 0)

    def test_single_node(self):
        assert path_length_to_optimum(make_lon([[1.0]], fitness=[3])) == (0.0, 0)

    def test_chain(self):
        W = [[0.75, 0.25, 0], [0, 0.5, 0.5], [0, 0, 1]]
        assert path_length_to_optimum(make_lon(W, fitness=[9, 5, 1])) == (4.0, 0)

    def test_nearest_of_several_optima(self):
        W = [[0, 0.5, 0.5, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 0, 1]]
        l_opt, unreachable = path_length_to_optimum(make_lon(W, fitness=[9, 1, 5, 1]))
        # node 0 reaches node 1 at 2; node 2 reaches node 3 at 1
        assert (l_opt, unreachable) == (1.5, 0)

    def test_unreachable_counted(self):
        W = [[1, 0, 0], [0, 0.5, 0.5], [0, 0, 1]]
        assert path_length_to_optimum(make_lon(W, fitness=[7, 5, 1])) == (2.0, 1)

    def test_networkx_oracle(self):
        lon = extract_lon(make_instance("uniform", 7, 2))
        w = lon.out_weights().tocoo()
        g = nx.DiGraph()
        g.add_weighted_edges_from((int(a), int(b), 1 / x) for a, b, x in zip(w.row, w.col, w.data))
        dists = []
        for v in range(lon.n_v):
            if v in lon.global_ids:
                continue
            d = [nx.shortest_path_length(g, v, t, weight="weight") for t in lon.global_ids
                 if nx.has_path(g, v, t)]
            if d:
                dists.append(min(d))
        assert path_length_to_optimum(lon)[0] == pytest.approx(np.mean(dists), rel=1e-12)


class TestDisparity:
    @pytest.mark.parametrize("k", [1, 2, 3, 7])
    def test_equal_weights(self, k):
        W = np.zeros((k + 1, k + 1))
        W[0, 1:] = 1 / k
        assert node_disparity(make_lon(W))[0] == pytest.approx(1 / k, abs=1e-15)

    def test_hand_value(self):
        W = np.zeros((3, 3))
        W[0] = [0.6, 0.3, 0.1]
        assert node_disparity(make_lon(W))[0] == pytest.approx(0.625, abs=1e-15)

    def test_self_loop_only_nodes_excluded(self):
        W = [[0.6, 0.4, 0], [0, 1, 0], [0, 0, 1]]
        assert disparity(make_lon(W)) == 1.0
        assert math.isnan(disparity(make_lon(np.eye(3))))

    @given(st.lists(st.floats(0.01, 1), min_size=1, max_size=8), st.floats(0.01, 10))
    def test_scale_invariance(self, weights, scale):
        k = len(weights)
        W = np.zeros((k + 1, k + 1))
        W[0, 1:] = weights
        V = W * scale
        assert node_disparity(make_lon(W))[0] == pytest.approx(node_disparity(make_lon(V))[0], rel=1e-12)


class TestFitnessCorrelation:
    def test_increasing(self):
        # chain 0 -> 1 -> ... -> 6; node 6 only loops, so it is excluded
        W = np.zeros((7, 7))
        for i in range(6):
            W[i, i + 1] = 1.0
        W[6, 6] = 1.0
        lon = make_lon(W, [1, 2, 3, 4, 5, 6, 100])
        assert fitness_fitness_correlation(lon) == pytest.approx(1.0, abs=1e-15)

    def test_decreasing(self):
        # node i points at node 5 - i
        W = np.zeros((6, 6))
        for i in range(6):
            W[i, 5 - i] = 1.0
        lon = make_lon(W, [1, 2, 3, 4, 5, 6])
        assert fitness_fitness_correlation(lon) == pytest.approx(-1.0, abs=1e-15)

    def test_hand_built_oracle(self):
        W = np.array([
            [0.2, 0.5, 0.3, 0.0, 0.0],
            [0.1, 0.1, 0.4, 0.4, 0.0],
            [0.0, 0.3, 0.2, 0.2, 0.3],
            [0.6, 0.0, 0.0, 0.1, 0.3],
            [0.0, 0.0, 0.5, 0.5, 0.0],
        ])
        f = np.array([40, 10, 30, 20, 10])
        off = W - np.diag(np.diag(W))
        fnn = off @ f / off.sum(axis=1)
        expected = pearsonr(rankdata(f), rankdata(fnn))[0]
        lon = make_lon(W, f)
        assert np.allclose(neighbor_fitness(lon), fnn, rtol=0, atol=1e-12)
        assert fitness_fitness_correlation(lon) == pytest.approx(expected, abs=1e-12)

    def test_too_few_nodes(self):
        assert math.isnan(fitness_fitness_correlation(make_lon([[0, 1], [1, 0]], [1, 2])))


class TestMcl:
    def test_two_components(self):
        W = undirected([(0, 1), (1, 2), (0, 2), (3, 4)], 5)
        for inflation in (1.4, 2.0, 4.0):
            labels = mcl_cluster(make_lon(W), inflation=inflation).labels
            assert labels[0] == labels[1] == labels[2] != labels[3] == labels[4]

    def test_single_node(self):
        part = mcl_cluster(make_lon([[1.0]]))
        assert part.labels.tolist() == [0] and part.n_clusters == 1

    def test_bridged_cliques(self):
        W = np.zeros((8, 8))
        for block in (range(4), range(4, 8)):
            for a in block:
                for b in block:
                    if a != b:
                        W[a, b] = 1.0
        W[3, 4] = W[4, 3] = 0.01
        part = mcl_cluster(make_lon(W), inflation=2.0)
        assert part.converged
        assert part.labels.tolist() == [0, 0, 0, 0, 1, 1, 1, 1]

    def test_never_merges_components(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            W, comp = random_two_component_graph(rng)
            labels = mcl_cluster(make_lon(W)).labels
            for c in np.unique(labels):
                assert np.unique(comp[labels == c]).size == 1

    def test_labels_contiguous_and_total(self):
        lon = extract_lon(make_instance("uniform", 7, 0))
        part = mcl_cluster(lon)
        assert part.labels.min() == 0
        assert set(part.labels.tolist()) == set(range(part.n_clusters))

    def test_iteration_cap(self):
        W = undirected([(a, b) for a in range(6) for b in range(a + 1, 6)], 6)
        part = mcl_cluster(make_lon(W + np.random.default_rng(0).random((6, 6)) * 0.1), max_iter=1)
        assert part.iterations == 1

    def test_inflation_must_exceed_one(self):
        with pytest.raises(ValueError):
            mcl_cluster(make_lon([[1.0]]), inflation=1.0)


class TestModularity:
    def cliques(self):
        return make_lon(undirected([(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], 6))

    def test_single_cluster(self):
        assert modularity(self.cliques(), np.zeros(6, dtype=int)) == 0.0

    def test_two_cliques(self):
        assert modularity(self.cliques(), [0, 0, 0, 1, 1, 1]) == pytest.approx(0.5, abs=1e-15)

    def test_edgeless(self):
        assert math.isnan(modularity(make_lon(np.eye(3)), Partition(np.arange(3))))

    def test_partition_must_be_total(self):
        with pytest.raises(ValueError):
            modularity(self.cliques(), [0, 1])

    def test_components_beat_random_colorings(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            W, comp = random_two_component_graph(rng)
            lon = make_lon(W)
            q = modularity(lon, comp)
            assert q >= modularity(lon, rng.integers(0, 2, size=comp.size)) - 1e-12

    @given(st.integers(0, 10**6))
    def test_networkx_oracle(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(3, 12))
        W = np.where(rng.random((k, k)) < 0.4, rng.random((k, k)), 0.0)
        labels = rng.integers(0, 3, size=k)
        U = W + W.T
        np.fill_diagonal(U, 0)
        g = nx.Graph()
        g.add_nodes_from(range(k))
        g.add_weighted_edges_from((a, b, U[a, b]) for a in range(k) for b in range(a + 1, k) if U[a, b] > 0)
        got = modularity(make_lon(W), labels)
        if g.number_of_edges() == 0:
            assert math.isnan(got)
            return
        comms = [set(np.flatnonzero(labels == c).tolist()) for c in np.unique(labels)]
        expected = 0.0 if len(comms) == 1 else nx.community.modularity(g, comms, weight="weight")
        assert got == pytest.approx(expected, abs=1e-12)
        assert -0.5 <= got <= 1


class TestComputeAll:
    def test_single_node(self):
        m = compute_all(make_lon([[1.0]], [4]))
        assert m.n_v == 1 and m.l_opt == 0 and m.unreachable_count == 0
        assert all(math.isnan(v) for v in (m.cc, m.y2, m.f_nn, m.q))

    def test_flat_landscape(self):
        assert compute_all(extract_lon(zero_a(5))).n_v == 120

    def test_serialization_round_trip(self, tmp_path):
        lon = extract_lon(make_instance("uniform", 7, 12))
        write_lon(lon, tmp_path / "x.nodes.tsv", tmp_path / "x.edges.tsv")
        back = read_lon(tmp_path / "x.nodes.tsv", tmp_path / "x.edges.tsv")
        assert compute_all(lon).as_dict() == compute_all(back).as_dict()

    @given(st.sampled_from(["uniform", "real-like"]), st.integers(0, 10**6))
    def test_ranges(self, cls, seed):
        m = compute_all(extract_lon(make_instance(cls, 6, seed)))
        for v, lo, hi in ((m.cc, 0, 1), (m.y2, 0, 1), (m.f_nn, -1, 1), (m.q, -0.5, 1)):
            assert math.isnan(v) or lo <= v <= hi
        assert m.l_opt >= 0 and m.n_v >= 1

    @given(st.integers(0, 10**6), st.integers(0, 10**6))
    def test_relabeling_invariance(self, seed, perm_seed):
        lon = extract_lon(make_instance("uniform", 6, seed))
        perm = np.random.default_rng(perm_seed).permutation(lon.n_v)
        W = lon.weights.toarray()[np.ix_(perm, perm)]
        other = Lon(n=lon.n, perms=lon.perms[perm], fitness=lon.fitness[perm],
                    basin_size=lon.basin_size[perm], weights=sp.csr_matrix(W))
        a, b = compute_all(lon), compute_all(other)
        for key in ("cc", "l_opt", "y2", "f_nn", "q"):
            x, y = getattr(a, key), getattr(b, key)
            assert (math.isnan(x) and math.isnan(y)) or x == pytest.approx(y, abs=1e-9)
