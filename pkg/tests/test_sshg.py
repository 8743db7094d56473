import random

import pytest
import torch

from ecqed.errors import ParameterError
from ecqed.sshg import EDGE_KINDS, RGCN, HeteroGraph, SpeakerTable, build_graph, graph_convolve

from conftest import make_dialog


def random_params(dim, layers=2, seed=0, scale=0.5):
    g = torch.Generator().manual_seed(seed)
    return [
        {k: (torch.randn(dim, dim, generator=g, dtype=torch.float64) * scale, torch.randn(dim, generator=g, dtype=torch.float64) * scale) for k in EDGE_KINDS}
        for _ in range(layers)
    ]


def brute_force_convolve(g, params):
    """Loop over every (layer, node, edge) with no matrix algebra."""
    h = [g.features[i].clone() for i in range(g.num_nodes)]
    for layer in params:
        new = []
        for n in range(g.num_nodes):
            acc = torch.zeros_like(h[0])
            for s, t, k in g.edges:
                if k not in layer:
                    continue
                w, b = layer[k]
                if k == "SELF":
                    neighbours = [s] if s == n else []
                else:
                    neighbours = ([s] if t == n else []) + ([t] if s == n else [])
                for v in neighbours:
                    acc = acc + w @ h[v] + b
            new.append(torch.clamp(acc, min=0.0))
        h = new
    return torch.stack([h[i] for i in g.utterance_nodes()])


def test_counts_six_utterances_two_speakers():
    d = make_dialog(6, speakers="AB")
    g = build_graph(d, torch.randn(6, 4), torch.randn(9, 4))
    assert g.num_nodes == 9
    assert g.edge_counts() == {"DU": 6, "SU": 6, "UU": 5, "SELF": 9}
    assert g.node_kinds.count("dialog") == 1 and g.node_kinds.count("speaker") == 2


def test_counts_single_utterance():
    d = make_dialog(1, speakers="A")
    g = build_graph(d, torch.randn(1, 4), torch.randn(9, 4))
    assert g.num_nodes == 3
    assert g.edge_counts() == {"DU": 1, "SU": 1, "UU": 0, "SELF": 3}


def test_dialog_node_is_mean_and_speakers_from_table():
    d = make_dialog(3, speakers="ABC")
    row = torch.tensor([1.0, -2.0, 3.0])
    table = torch.arange(27, dtype=torch.float32).reshape(9, 3)
    g = build_graph(d, row.repeat(3, 1), table)
    assert torch.equal(g.features[-1], row)
    assert torch.equal(g.features[3:6], table[:3])


def test_speaker_role_slots_cap_with_fallback():
    table = SpeakerTable(4)
    emb = table(11)
    assert emb.shape == (11, 4)
    assert torch.equal(emb[8], emb[10])  # roles beyond the cap share the fallback slot
    assert not torch.equal(emb[0], emb[1])


def test_zero_params_give_zero_output():
    d = make_dialog(4)
    g = build_graph(d, torch.randn(4, 5, dtype=torch.float64), torch.randn(9, 5, dtype=torch.float64))
    zero = [{k: (torch.zeros(5, 5, dtype=torch.float64), torch.zeros(5, dtype=torch.float64)) for k in EDGE_KINDS}] * 2
    assert torch.equal(graph_convolve(g, zero), torch.zeros(4, 5, dtype=torch.float64))


def test_self_loop_identity():
    h = torch.tensor([[0.5, 2.0, 0.0]], dtype=torch.float64)
    g = HeteroGraph(["utterance"], h, [(0, 0, "SELF")], 1)
    params = [{"SELF": (torch.eye(3, dtype=torch.float64), torch.zeros(3, dtype=torch.float64))}]
    assert torch.equal(graph_convolve(g, params), h)


@pytest.mark.parametrize("seed", range(10))
def test_matches_bruteforce_on_random_four_node_graphs(seed):
    rng = random.Random(seed)
    dim = 5
    kinds = ["utterance", "utterance", "speaker", "dialog"]
    edges = [(v, v, "SELF") for v in range(4)]
    for s in range(4):
        for t in range(s + 1, 4):
            for k in ("DU", "SU", "UU"):
                if rng.random() < 0.35:
                    edges.append((s, t, k))
    feats = torch.randn(4, dim, dtype=torch.float64, generator=torch.Generator().manual_seed(seed))
    g = HeteroGraph(kinds, feats, edges, 2)
    params = random_params(dim, seed=seed)
    assert torch.allclose(graph_convolve(g, params), brute_force_convolve(g, params), atol=1e-6, rtol=0)


def test_output_shape_and_nonnegative():
    d = make_dialog(7, speakers="ABC")
    g = build_graph(d, torch.randn(7, 6, dtype=torch.float64), torch.randn(9, 6, dtype=torch.float64))
    out = graph_convolve(g, random_params(6, seed=2))
    assert out.shape == (7, 6) and (out >= 0).all()


def test_isomorphism_invariance():
    d = make_dialog(5, speakers="AB")
    g = build_graph(d, torch.randn(5, 4, dtype=torch.float64), torch.randn(9, 4, dtype=torch.float64))
    params = random_params(4, seed=7)
    perm = list(range(g.num_nodes))
    random.Random(0).shuffle(perm)  # perm[old] = new
    inv = {new: old for old, new in enumerate(perm)}
    feats = torch.stack([g.features[inv[i]] for i in range(g.num_nodes)])
    kinds = [g.node_kinds[inv[i]] for i in range(g.num_nodes)]
    edges = [(perm[s], perm[t], k) for s, t, k in g.edges]
    relabelled = HeteroGraph(kinds, feats, edges, g.num_utterances)
    out = graph_convolve(relabelled, params)
    # utterance rows come back in new-node order; map them to original utterance order
    new_order = sorted(range(5), key=lambda u: perm[u])
    expected = graph_convolve(g, params)[new_order]
    assert torch.allclose(out, expected, atol=1e-12)


def test_dropping_edge_kind_equals_zeroing_its_messages():
    d = make_dialog(5, speakers="AB")
    X = torch.randn(5, 4, dtype=torch.float64)
    table = torch.randn(9, 4, dtype=torch.float64)
    params = random_params(4, seed=3)
    for drop, kind in ((dict(use_su_edges=False), "SU"), (dict(use_du_edges=False), "DU")):
        ablated = graph_convolve(build_graph(d, X, table, **drop), params)
        zeroed = [dict(layer) for layer in params]
        for layer in zeroed:
            layer[kind] = (torch.zeros(4, 4, dtype=torch.float64), torch.zeros(4, dtype=torch.float64))
        full_graph = graph_convolve(build_graph(d, X, table), zeroed)
        assert torch.allclose(ablated, full_graph, atol=1e-12)


def test_shape_mismatch_raises():
    d = make_dialog(2)
    g = build_graph(d, torch.randn(2, 4), torch.randn(9, 4))
    with pytest.raises(ParameterError):
        graph_convolve(g, [{"SELF": (torch.eye(3), torch.zeros(3))}])


def test_module_forward_shape():
    d = make_dialog(4)
    m = RGCN(6, num_layers=2)
    g = build_graph(d, torch.randn(4, 6), SpeakerTable(6))
    assert m(g).shape == (4, 6)
