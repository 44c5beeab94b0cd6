from __future__ import annotations

import random

import numpy as np
import pytest

from wikilinks.analytics import (
    GraphStats,
    compute_stats,
    load_graph_file,
    pagerank,
    rank_articles,
    write_growth_series,
    write_rankings,
)
from wikilinks.errors import ConfigurationError, DataFormatError
from wikilinks.graph import EdgeRecord, emit_edges, emit_nodes
from wikilinks.storage import iter_rows


def dense_pagerank(edges, nodes, damping=0.85):
    """Oracle: direct solve of (I - d A^T) x = (1-d)/N with dangling rows uniform."""
    ids = sorted(set(nodes) | {s for s, _ in edges} | {d for _, d in edges})
    index = {node: i for i, node in enumerate(ids)}
    n = len(ids)
    transition = np.zeros((n, n))
    out = np.zeros(n)
    for src, _ in edges:
        out[index[src]] += 1
    for src, dst in edges:
        transition[index[src], index[dst]] += 1.0 / out[index[src]]
    for i in range(n):
        if out[i] == 0:
            transition[i, :] = 1.0 / n
    solution = np.linalg.solve(
        np.eye(n) - damping * transition.T, np.full(n, (1.0 - damping) / n)
    )
    return ids, solution


def graph_files(tmp_path, edges, nodes):
    edge_path = tmp_path / "g.csv.gz"
    node_path = tmp_path / "g.nodes.csv.gz"
    emit_edges([EdgeRecord(s, f"N{s}", d, f"N{d}") for s, d in edges], edge_path)
    emit_nodes([(n, f"N{n}") for n in nodes], node_path)
    return edge_path, node_path


class TestComputeStats:
    def test_triangle(self, tmp_path):
        edge_path, node_path = graph_files(tmp_path, [(1, 2), (2, 3), (3, 1)], [1, 2, 3])
        stats = compute_stats(edge_path, node_path, language="en", date="2018-03-01")
        assert (stats.node_count, stats.edge_count) == (3, 3)

    def test_empty_graph(self, tmp_path):
        edge_path, node_path = graph_files(tmp_path, [], [])
        stats = compute_stats(edge_path, node_path)
        assert (stats.node_count, stats.edge_count) == (0, 0)

    def test_isolated_nodes_counted(self, tmp_path):
        edge_path, node_path = graph_files(tmp_path, [(1, 2)], [1, 2, 3])
        stats = compute_stats(edge_path, node_path)
        assert (stats.node_count, stats.edge_count) == (3, 1)

    def test_malformed_row_is_fatal_with_line(self, tmp_path):
        import gzip

        edge_path = tmp_path / "bad.csv.gz"
        with gzip.open(edge_path, "wt", encoding="utf-8") as f:
            f.write("page_id_from,page_title_from,page_id_to,page_title_to\n")
            f.write("1,A,2,B\n")
            f.write("x,A,2,B\n")
        node_path = tmp_path / "n.csv.gz"
        emit_nodes([], node_path)
        with pytest.raises(DataFormatError, match="row 3"):
            compute_stats(edge_path, node_path)


class TestGrowthSeries:
    def test_rows_sorted_and_complete(self, tmp_path):
        stats = [
            GraphStats("en", "2018-03-01", 12, 18),
            GraphStats("en", "2017-03-01", 10, 12),
        ]
        path = tmp_path / "growth.csv"
        assert write_growth_series(stats, path) == 2
        rows = list(iter_rows(path, ("language", "date", "nodes", "edges")))
        assert rows == [
            ["en", "2017-03-01", "10", "12"],
            ["en", "2018-03-01", "12", "18"],
        ]

    def test_missing_year_simply_omitted(self, tmp_path):
        stats = [GraphStats("en", "2017-03-01", 1, 0)]
        path = tmp_path / "growth.csv"
        assert write_growth_series(stats, path) == 1


class TestPageRank:
    def test_triangle_symmetry_exact(self):
        result = pagerank([(1, 2), (2, 3), (3, 1)])
        assert result.converged
        np.testing.assert_allclose(result.scores, 1 / 3, atol=1e-12)

    def test_two_node_graph_matches_dense_solve(self):
        edges = [(1, 2)]
        result = pagerank(edges, tolerance=1e-14, max_iter=1000)
        ids, expected = dense_pagerank(edges, [1, 2])
        assert list(result.node_ids) == ids
        np.testing.assert_allclose(result.scores, expected, atol=1e-10)

    def test_scores_sum_to_one_at_every_iteration(self):
        edges = [(1, 2), (2, 3), (3, 1), (1, 3), (4, 1)]
        for iterations in (1, 2, 3, 5, 10, 50):
            result = pagerank(edges, max_iter=iterations, tolerance=0.0)
            assert abs(result.scores.sum() - 1.0) < 1e-9
            assert (result.scores >= 0).all()

    def test_dangling_node_mass_redistributed(self):
        # 2 -> dangling; its mass must come back uniformly
        edges = [(1, 2)]
        result = pagerank(edges, tolerance=1e-14, max_iter=1000)
        ids, expected = dense_pagerank(edges, [1, 2])
        np.testing.assert_allclose(result.scores, expected, atol=1e-12)

    def test_isolated_nodes_share_teleport(self):
        result = pagerank([(1, 2)], nodes=[1, 2, 3])
        assert len(result.node_ids) == 3
        assert abs(result.scores.sum() - 1.0) < 1e-9

    def test_random_graphs_match_dense_solve(self):
        # module invariant: dense agreement within 1e-10 up to 8 nodes
        rng = random.Random(42)
        for _ in range(60):
            n = rng.randrange(1, 9)
            nodes = list(range(n))
            edges = [
                (s, d)
                for s in nodes
                for d in nodes
                if rng.random() < 0.4
            ]
            result = pagerank(edges, nodes, tolerance=1e-14, max_iter=2000)
            ids, expected = dense_pagerank(edges, nodes)
            assert list(result.node_ids) == ids
            np.testing.assert_allclose(result.scores, expected, atol=1e-10)

    def test_rank_order_invariant_under_relabeling(self):
        edges = [(0, 1), (1, 2), (2, 0), (3, 1), (3, 2), (4, 3)]
        nodes = [0, 1, 2, 3, 4]
        mapping = {0: 40, 1: 17, 2: 99, 3: 3, 4: 58}
        base = pagerank(edges, nodes, tolerance=1e-14, max_iter=2000)
        permuted = pagerank(
            [(mapping[s], mapping[d]) for s, d in edges],
            [mapping[n] for n in nodes],
            tolerance=1e-14,
            max_iter=2000,
        )
        base_scores = base.as_mapping()
        permuted_scores = permuted.as_mapping()
        for node in nodes:
            assert abs(base_scores[node] - permuted_scores[mapping[node]]) < 1e-12

    def test_non_convergence_flagged(self):
        # asymmetric graph: the uniform start is not the fixed point
        result = pagerank([(1, 2)], max_iter=2, tolerance=1e-30)
        assert not result.converged
        assert result.iterations == 2

    def test_damping_validated(self):
        with pytest.raises(ConfigurationError):
            pagerank([(1, 2)], damping=1.0)

    def test_empty_graph_rejected(self):
        with pytest.raises(ConfigurationError):
            pagerank([])


class TestRankings:
    def test_ranking_sorted_with_title_tiebreak(self):
        result = pagerank([(1, 3), (2, 3)], nodes=[1, 2, 3])
        ranked = rank_articles(result, {1: "B", 2: "A", 3: "C"})
        assert [a.title for a in ranked] == ["C", "A", "B"]  # 1 and 2 tie

    def test_rankings_csv_format(self, tmp_path):
        result = pagerank([(1, 2)], tolerance=1e-14, max_iter=500)
        ranked = rank_articles(result, {1: "One", 2: "Two"})
        path = tmp_path / "rank.csv.gz"
        assert write_rankings(ranked, path) == 2
        rows = list(iter_rows(path, ("rank", "title", "score")))
        assert rows[0][0] == "1"
        assert rows[0][1] == "Two"
        # six significant digits, scientific notation
        assert len(rows[0][2].split("e")[0].replace(".", "").replace("-", "")) == 6
        float(rows[0][2])

    def test_load_graph_file_includes_isolated_nodes(self, tmp_path):
        edge_path, node_path = graph_files(tmp_path, [(1, 2)], [1, 2, 3])
        edges, titles = load_graph_file(edge_path, node_path)
        assert edges == [(1, 2)]
        assert titles == {1: "N1", 2: "N2", 3: "N3"}
