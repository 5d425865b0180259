import json

import pytest

from layeralg.graph_ir import (
    Activation, Add, BatchNorm, Concat, Conv2D, ConvTranspose2D, Dense, Dropout, Flatten,
    GlobalPool, GraphBuilder, GraphCycleError, GraphParseError, GraphValidationError, Identity,
    Input, LayerNode, NetworkGraph, Pool2D, ShapeError, depth_index, ensure_shapes, infer_shapes,
    parse_graph, resolve_padding, serialize_graph, topological_order, validate_graph,
)
from layeralg.model_zoo import build_plainnet, build_resnet


def doc(nodes, shape=(784,), name="g"):
    return json.dumps({"name": name, "input_shape": list(shape), "nodes": nodes})


MINIMAL = doc([
    {"id": "in", "kind": "input", "params": {}, "inputs": []},
    {"id": "fc", "kind": "dense", "params": {"units": 10}, "inputs": ["in"]},
])


def chain(*ops, shape=(16,)):
    b = GraphBuilder("chain", shape)
    for op in ops:
        b.add(op)
    return b


def raw(nodes, shape=(8,)):
    return NetworkGraph("raw", shape, tuple(nodes))


# --- parsing / serialization -------------------------------------------------


def test_parse_minimal():
    g = parse_graph(MINIMAL)
    assert len(g.nodes) == 2
    assert g.node("fc").op == Dense(10)
    assert g.node("fc").inputs == ("in",)


def test_parse_duplicate_id():
    text = doc([
        {"id": "in", "kind": "input", "params": {}, "inputs": []},
        {"id": "c1", "kind": "dense", "params": {"units": 4}, "inputs": ["in"]},
        {"id": "c1", "kind": "dense", "params": {"units": 4}, "inputs": ["c1"]},
    ])
    with pytest.raises(GraphParseError, match="duplicate id c1"):
        parse_graph(text)


@pytest.mark.parametrize("node, fragment", [
    ({"id": "x", "kind": "warp", "params": {}, "inputs": ["in"]}, "x: unknown kind 'warp'"),
    ({"id": "x", "kind": "dense", "params": {}, "inputs": ["in"]}, "x: missing required field 'units'"),
    ({"id": "x", "kind": "dense", "params": {"units": 3, "gain": 2}, "inputs": ["in"]}, "x: unknown field 'gain'"),
    ({"id": "x", "kind": "dense", "params": {"units": 0}, "inputs": ["in"]}, "x: units"),
    ({"id": "x", "kind": "dense", "params": {"units": 3}}, "x: missing required field 'inputs'"),
])
def test_parse_errors_name_node_and_field(node, fragment):
    text = doc([{"id": "in", "kind": "input", "params": {}, "inputs": []}, node])
    with pytest.raises(GraphParseError, match=fragment):
        parse_graph(text)


def test_parse_malformed_json():
    with pytest.raises(GraphParseError, match="malformed JSON"):
        parse_graph("{not json")


@pytest.mark.parametrize("shape", [[], [0], [1, 2, 3, 4, 5], [2.5]])
def test_parse_bad_input_shape(shape):
    with pytest.raises(GraphParseError, match="input_shape"):
        parse_graph(doc([{"id": "in", "kind": "input", "params": {}, "inputs": []}], shape=shape))


def test_serialize_two_nodes_and_determinism():
    g = parse_graph(MINIMAL)
    s1, s2 = serialize_graph(g), serialize_graph(g)
    assert s1 == s2
    assert len(json.loads(s1)["nodes"]) == 2
    assert s1.endswith("\n")


def test_padding_tuple_roundtrip():
    g = chain(Conv2D(3, 3, 4, padding=(1, 1)), shape=(8, 8, 2)).build()
    again = parse_graph(serialize_graph(g))
    assert again.node("conv2d_1").op.padding == (1, 1)
    assert again == g


def resnet18_node_count():
    # input + stem(conv, bn, relu, pool) + head(gap, fc, softmax)
    # basic block: conv,bn,relu,conv,bn + add + relu, plus Identity or (conv, bn) shortcut
    blocks, downsample = 8, 3
    return 1 + 4 + blocks * (5 + 2 + 1) + downsample * 1 + 3


def test_resnet18_roundtrip():
    g = build_resnet(18)
    text = serialize_graph(g)
    again = parse_graph(text)
    assert len(again.nodes) == resnet18_node_count() == 75
    assert again == g
    assert serialize_graph(again) == text
    assert infer_shapes(again).nodes[-1].out_shape == (1000,)


# --- validation ---------------------------------------------------------------


def test_valid_chain_empty_report():
    g = chain(Dense(8), Activation("relu")).build(infer=False)
    assert validate_graph(g).ok


def test_cycle_violation():
    g = raw([
        LayerNode("in", Input()),
        LayerNode("a", Dense(8), ("in", "b")),
        LayerNode("b", Dense(8), ("a",)),
        LayerNode("out", Dense(8), ("b",)),
    ])
    assert "cycle" in validate_graph(g).kinds()


def test_two_node_cycle_a_b_a():
    g = raw([
        LayerNode("in", Input()),
        LayerNode("a", Add(), ("in", "b")),
        LayerNode("b", Dense(8), ("a",)),
    ])
    assert "cycle" in validate_graph(g).kinds()
    with pytest.raises(GraphCycleError):
        topological_order(g)


def test_add_arity_violation():
    g = raw([LayerNode("in", Input()), LayerNode("s", Add(), ("in",))])
    assert "arity" in validate_graph(g).kinds()


@pytest.mark.parametrize("nodes, kind", [
    ([LayerNode("in", Input()), LayerNode("d", Dense(2), ("nope",))], "dangling"),
    ([LayerNode("in", Input()), LayerNode("in2", Input()), LayerNode("s", Add(), ("in", "in2"))], "input_count"),
    ([LayerNode("in", Input()), LayerNode("a", Dense(2), ("in",)), LayerNode("b", Dense(2), ("in",))], "multi_sink"),
    ([LayerNode("in", Input()), LayerNode("a", Dense(2), ("in",)), LayerNode("a", Dense(2), ("a",))], "duplicate_id"),
    ([LayerNode("in", Input()), LayerNode("a", Dense(2), ("in", "in"))], "arity"),
])
def test_structural_violations(nodes, kind):
    assert kind in validate_graph(raw(nodes)).kinds()


def test_violation_str_mentions_node():
    g = raw([LayerNode("in", Input()), LayerNode("s", Add(), ("in",))])
    (v,) = validate_graph(g).violations
    assert str(v).startswith("arity at s")


def test_infer_raises_with_report():
    g = raw([LayerNode("in", Input()), LayerNode("s", Add(), ("in",))])
    with pytest.raises(GraphValidationError) as exc:
        infer_shapes(g)
    assert exc.value.report.kinds() == {"arity"}


# --- traversal ----------------------------------------------------------------


def diamond(long_c=False):
    b = GraphBuilder("diamond", (8,))
    b.add(Dense(8), id="a")
    b.add(Dense(8), inputs="a", id="b")
    b.add(Dense(8), inputs="a", id="c")
    tail = "c"
    if long_c:
        tail = b.add(Activation("relu"), inputs="c", id="c2")
    b.add(Add(), inputs=("b", tail), id="d")
    return b.build()


def test_topological_chain():
    g = chain(Dense(4), Dense(4)).build()
    assert topological_order(g) == ["input", "dense_1", "dense_2"]


def test_topological_diamond_tie_break():
    assert topological_order(diamond()) == ["input", "a", "b", "c", "d"]


def test_topological_declaration_order_not_required():
    g = raw([
        LayerNode("out", Dense(2), ("mid",)),
        LayerNode("mid", Dense(2), ("in",)),
        LayerNode("in", Input()),
    ])
    assert topological_order(g) == ["in", "mid", "out"]


def test_topological_resnet_add_after_branches():
    g = build_resnet(18)
    order = topological_order(g)
    pos = {nid: i for i, nid in enumerate(order)}
    adds = [n for n in g.nodes if n.kind == "add"]
    assert len(adds) == 8
    for n in g.nodes:
        for src in n.inputs:
            assert pos[src] < pos[n.id]


def test_depth_chain():
    g = chain(Dense(4), Dense(4), Dense(4), Dense(4)).build()
    assert list(depth_index(g).values()) == [0, 1, 2, 3, 4]


def test_depth_diamond_longest_path():
    d = depth_index(diamond(long_c=True))
    assert d["d"] == 1 + max(d["b"], d["c2"]) == 4


def test_depth_resnet_vs_plainnet():
    r = max(depth_index(build_resnet(18)).values())
    p = max(depth_index(build_plainnet(18)).values())
    assert r >= p
    assert r == p + 8  # one Add per block on the longest path


# --- shape inference ----------------------------------------------------------


def test_conv_same():
    g = chain(Conv2D(3, 3, 64, padding="same"), shape=(32, 32, 3)).build()
    assert g.nodes[-1].out_shape == (32, 32, 64)


def test_pool_valid():
    g = chain(Pool2D("max", 2, 2, stride=2), shape=(32, 32, 64)).build()
    assert g.nodes[-1].out_shape == (16, 16, 64)


def test_transpose_conv():
    g = chain(ConvTranspose2D(2, 2, 7, stride=2), shape=(8, 8, 16)).build()
    assert g.nodes[-1].out_shape == (16, 16, 7)


def test_transpose_conv_3x3():
    g = chain(ConvTranspose2D(3, 3, 1), shape=(4, 4, 1)).build()
    assert g.nodes[-1].out_shape == (6, 6, 1)


def test_strided_conv_explicit_padding():
    # ResNet stem: 224 -> 112
    g = chain(Conv2D(7, 7, 64, stride=2, padding=(3, 3)), shape=(224, 224, 3)).build()
    assert g.nodes[-1].out_shape == (112, 112, 64)


def test_same_padding_even_kernel_rejected():
    with pytest.raises(ShapeError, match="odd"):
        resolve_padding("same", 2, 2)


def test_flatten_dense_globalpool_concat():
    b = GraphBuilder("mix", (4, 4, 3))
    b.add(Conv2D(1, 1, 5), id="c1")
    b.add(Conv2D(1, 1, 2), inputs="input", id="c2")
    b.add(Concat(), inputs=("c1", "c2"), id="cat")
    b.add(BatchNorm(), id="bn")
    b.add(Dropout(0.1), id="do")
    b.add(Identity(), id="id")
    b.add(Flatten(), id="flat")
    b.add(Dense(3), id="fc")
    g = b.build()
    assert g.node("cat").out_shape == (4, 4, 7)
    assert g.node("flat").out_shape == (112,)
    assert g.node("fc").out_shape == (3,)
    g2 = chain(GlobalPool(), Dense(2), shape=(7, 7, 9)).build()
    assert g2.node("global_pool_1").out_shape == (9,)


def test_add_shape_mismatch():
    b = GraphBuilder("bad", (4, 4, 3))
    b.add(Conv2D(1, 1, 5), id="c1")
    b.add(Add(), inputs=("input", "c1"))
    with pytest.raises(ShapeError, match="add inputs differ"):
        b.build()


def test_dense_needs_flat_input():
    with pytest.raises(ShapeError, match="flatten"):
        chain(Dense(3), shape=(4, 4, 3)).build()


def test_non_positive_dim():
    with pytest.raises(ShapeError, match="non-positive"):
        chain(Conv2D(5, 5, 1), shape=(3, 3, 1)).build()


def test_ensure_shapes_idempotent():
    g = build_resnet(18)
    assert ensure_shapes(g) is g


@pytest.mark.parametrize("bad", [
    lambda: Conv2D(0, 3, 4),
    lambda: Dense(-1),
    lambda: Dropout(1.0),
    lambda: Pool2D("median", 2, 2, 2),
    lambda: Activation("gelu"),
    lambda: Conv2D(3, 3, 4, padding=(1,)),
])
def test_kind_invariants(bad):
    with pytest.raises(ValueError):
        bad()
