import itertools
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cyclic_formality.graphs import (
    AdmissibleGraph,
    brute_force_classes,
    canonical_key,
    canonicalize,
    edge_boundary,
    edge_conservation,
    enumerate_graphs,
    figure_graph,
    relabel_interior,
    validate,
)


def one_vertex(targets, m=1, deg=0, n_w=None):
    if n_w is None:
        n_w = sum(1 for t in targets if t[0] == "w")
    return AdmissibleGraph(1, m, n_w, (len(targets),), (deg,), (tuple(targets),))


def test_figure_graph_is_admissible():
    g = figure_graph()
    assert validate(g) == []
    assert g.k == (2, 3) and g.m == 3 and g.n_w == 1


def test_self_loop_violates_rule_4():
    g = AdmissibleGraph(2, 1, 0, (1, 1), (0, 0), ((("v", 0),), (("b", 0),)))
    problems = validate(g)
    assert any(p.startswith("rule 4") for p in problems)


def test_double_white_edge_violates_rules_3_and_5():
    g = one_vertex([("w", 0), ("w", 0)])
    rules = {p.split(":")[0] for p in validate(g)}
    assert {"rule 3", "rule 5"} <= rules


def test_out_degree_mismatch_violates_rule_1():
    g = AdmissibleGraph(1, 1, 0, (2,), (0,), ((("b", 0),),))
    assert any(p.startswith("rule 1") for p in validate(g))


def test_missing_target_is_reported():
    g = one_vertex([("b", 3)])
    assert any(p.startswith("range") for p in validate(g))


@pytest.mark.parametrize("max_deg", [0, 1, 3])
def test_isolated_vertex_classes(max_deg):
    graphs = enumerate_graphs((0,), 1, max_deg)
    assert len(graphs) == max_deg + 1
    assert sorted(g.deg for g in graphs) == [(d,) for d in range(max_deg + 1)]


def test_single_edge_classes():
    graphs = enumerate_graphs((1,), 1)
    assert len(graphs) == 2
    assert {g.targets for g in graphs} == {((("b", 0),),), ((("w", 0),),)}


def test_two_edge_classes():
    graphs = enumerate_graphs((2,), 1)
    assert len(graphs) == len(brute_force_classes((2,), 1)) == 3
    rows = {g.targets[0] for g in graphs}
    assert (("w", 0), ("w", 1)) in rows
    assert (("b", 0), ("w", 0)) in rows and (("w", 0), ("b", 0)) in rows


def _cases():
    """Out-degree vectors with up to three vertices and at most four edges."""
    for n in range(1, 4):
        for k in itertools.product(range(5), repeat=n):
            if sum(k) <= 4:
                for m in (1, 2, 3):
                    yield k, m


@pytest.mark.parametrize("k,m", list(_cases()))
def test_enumeration_matches_brute_force(k, m):
    graphs = enumerate_graphs(k, m, 2)
    keys = [canonical_key(g) for g in graphs]
    assert len(set(keys)) == len(keys)
    assert len(keys) == len(brute_force_classes(k, m, 2))
    assert all(validate(g) == [] for g in graphs)


def test_enumeration_contains_figure_class():
    keys = {canonical_key(g) for g in enumerate_graphs((2, 3), 3)}
    assert canonical_key(figure_graph()) in keys


def test_bad_enumeration_input():
    with pytest.raises(ValueError):
        enumerate_graphs((1,), 0)
    with pytest.raises(ValueError):
        enumerate_graphs((-1,), 1)


# -- edge boundary ---------------------------------------------------------------

def test_edge_boundary_single_edge():
    g = one_vertex([("b", 0)])
    h, s = edge_boundary(g, (0, 0))
    assert s == -1
    assert h == one_vertex([("w", 0)])


def test_edge_boundary_on_figure_graph():
    g = figure_graph()
    h, s = edge_boundary(g, (0, 1))
    assert validate(h) == []
    assert h.n_w == 2
    assert h.targets[0] == (("b", 0), ("w", 0))
    assert h.targets[1] == (("b", 1), ("b", 2), ("w", 1))
    # second black edge in global order
    assert s == 1


def test_edge_boundary_rejects_white_edge():
    with pytest.raises(ValueError):
        edge_boundary(figure_graph(), (1, 2))


@given(st.sampled_from(enumerate_graphs((2, 1), 2)), st.data())
def test_edge_boundary_keeps_admissibility(g, data):
    black = [(i, p) for i, p, _t in g.black_edges()]
    if not black:
        return
    e = data.draw(st.sampled_from(black))
    h, s = edge_boundary(g, e)
    assert validate(h) == []
    assert h.n_w == g.n_w + 1
    assert s in (1, -1)
    assert edge_conservation(h)


# -- canonical keys ---------------------------------------------------------------

def test_white_relabeling_gives_equal_keys():
    a = one_vertex([("w", 0), ("b", 0), ("w", 1)])
    b = one_vertex([("w", 1), ("b", 0), ("w", 0)])
    assert canonical_key(a) == canonical_key(b)


def test_edge_order_is_structure():
    a = one_vertex([("b", 0), ("b", 1)], m=2)
    b = one_vertex([("b", 1), ("b", 0)], m=2)
    assert canonical_key(a) != canonical_key(b)


def test_invalid_graph_has_no_key():
    with pytest.raises(ValueError):
        canonical_key(one_vertex([("w", 0), ("w", 0)]))


@given(st.sampled_from(enumerate_graphs((2, 2), 2)), st.data())
def test_canonical_key_ignores_white_names(g, data):
    perm = data.draw(st.permutations(range(g.n_w)))
    relabeled = AdmissibleGraph(
        g.n1, g.m, g.n_w, g.k, g.deg,
        tuple(tuple(("w", perm[j]) if kind == "w" else (kind, j) for kind, j in ts) for ts in g.targets))
    assert canonical_key(relabeled) == canonical_key(g)
    assert canonicalize(canonicalize(relabeled)) == canonicalize(g)


@given(st.sampled_from(enumerate_graphs((1, 2), 2, 1)))
def test_edge_conservation(g):
    assert edge_conservation(g)
    assert len(g.black_edges()) + g.n_w == sum(g.k)


@given(st.sampled_from(enumerate_graphs((2, 1), 3, 1)))
def test_json_round_trip(g):
    assert AdmissibleGraph.from_dict(json.loads(g.to_json())) == g


def test_dot_output_lists_every_edge():
    dot = figure_graph().to_dot()
    assert dot.startswith("digraph")
    assert dot.count("->") == 5


# -- interior relabeling ---------------------------------------------------------------

def test_relabel_swaps_vertices():
    g = AdmissibleGraph(2, 1, 0, (1, 1), (0, 0), ((("v", 1),), (("b", 0),)))
    h, s = relabel_interior(g, (1, 0))
    assert h.targets == ((("b", 0),), (("v", 0),))
    # two black edges exchange their order
    assert s == -1


def test_relabel_identity():
    g = figure_graph()
    assert relabel_interior(g, (0, 1)) == (canonicalize(g), 1)


@given(st.sampled_from(enumerate_graphs((1, 1, 2), 2)), st.permutations(range(3)))
def test_relabel_round_trip(g, perm):
    h, s = relabel_interior(g, perm)
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    back, t = relabel_interior(h, inv)
    assert back == canonicalize(g)
    assert s * t == 1
    assert validate(h) == []
