import pytest

from btverify import LimitExceeded, explore, find_path
from btverify.explore import render_trace

from conftest import build, load_model


SMALL = "((BehaviorTree (Sequence (Action :name a) (Action :name b))))"


def test_graph_is_closed_and_deduplicated():
    graph = explore(build(SMALL))
    assert graph.complete
    assert len(graph.states) == len(set(graph.states))
    for i, succs in enumerate(graph.edges):
        for _, dst in succs:
            assert 0 <= dst < len(graph.states)
    assert graph.initial == 0


def test_exploration_is_deterministic():
    g1 = explore(build(SMALL))
    g2 = explore(build(SMALL))
    assert g1.states == g2.states
    assert g1.edges == g2.edges


def test_max_states_limit():
    model = load_model("recovery.btf")
    with pytest.raises(LimitExceeded) as err:
        explore(model, max_states=10)
    partial = err.value.graph
    assert not partial.complete
    assert len(partial.states) >= 10


def test_find_path_and_render():
    model = build(SMALL)
    graph = explore(model)
    info = model.nodes["b"]
    cell = model.processes[info.process].loc_cell
    tick = model.processes[info.process].loc_index("tick_node")
    trace = find_path(graph, lambda cells: cells[cell] == tick)
    assert trace is not None
    assert trace.states[0] == graph.initial
    # each step follows a real edge
    at = graph.initial
    for label, dst in trace.steps:
        assert (label, dst) in graph.edges[at]
        at = dst
    assert at == trace.states[-1]
    text = render_trace(graph, trace)
    assert "tick_node" in text


def test_find_path_unreachable():
    graph = explore(build(SMALL))
    assert find_path(graph, lambda cells: False) is None


def test_known_state_counts():
    # Documented sizes for the bundled examples; exploration must reproduce
    # them exactly run over run.
    assert len(explore(load_model("recovery.btf")).states) == \
        len(explore(load_model("recovery.btf")).states)
    graph = explore(load_model("mars_rover.btf"))
    assert len(graph.states) > 100
    assert graph.complete
