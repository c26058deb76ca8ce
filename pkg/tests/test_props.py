import pytest

from btverify import check, explore, parse_properties
from btverify.props import PropertyError, check_all, default_properties

from conftest import build, corpus_text


@pytest.fixture(scope="module")
def tiny_graph():
    return explore(build(
        "((BehaviorTree (Sequence :name s"
        " (Eval :name e1 (= 1 1)) (Eval :name e2 (= 1 1)))))"))


@pytest.fixture(scope="module")
def action_graph():
    return explore(build("((BehaviorTree (Action :name a)))"))


def test_parse_all_forms():
    props = parse_properties("""
    // comment
    property p1 is absent sv(x) > 3
    property p2 is present node(n)@halted expect: FALSE
    property p3 is deadlockfree
    property p4 is node(a)@tick_node leadsto rstatus(a) = success within [0, 2]
    property p5 is always terminal(failure) implies eventually node(b)@done
    property p6 is absent sv(m) = Storm and not local(r.retry) > 1
    """)
    assert [p.kind for p in props] == [
        "absent", "present", "deadlockfree", "leadsto",
        "implies_eventually", "absent"]
    assert props[1].expect is False
    assert props[0].expect is None
    assert (props[3].lo, props[3].hi) == (0, 2)


@pytest.mark.parametrize("bad", [
    "property p is absent",
    "property p is node(a)@x leadsto node(b)@y within [2,1]",
    "property p is node(a)@x leadsto node(b)@y within [-1,2]",
    "property is absent sv(x) = 1",
    "property p is sometimes sv(x) = 1",
    "property p is absent sv(x) = 1 expect: MAYBE",
])
def test_parse_rejections(bad):
    with pytest.raises(PropertyError):
        parse_properties(bad)


def test_unknown_names_rejected(tiny_graph):
    prop, = parse_properties("property p is present node(nosuch)@done")
    with pytest.raises(PropertyError):
        check(tiny_graph, prop)
    prop, = parse_properties("property p is present sv(nosuch) = 1")
    with pytest.raises(PropertyError):
        check(tiny_graph, prop)


def test_verdicts_on_deterministic_tree(tiny_graph):
    text = """
    property done is present node(e2)@done
    property never_fails is absent terminal(failure)
    property df is deadlockfree
    property fast is node(s)@tick_node leadsto terminal(success) within [0,0]
    property ie is always node(e1)@done implies eventually terminal(success)
    """
    results = check_all(tiny_graph, parse_properties(text))
    assert [v.value for v in results] == ["TRUE"] * 5


def test_witness_is_a_real_path(tiny_graph):
    prop, = parse_properties("property p is absent node(e2)@done")
    verdict = check(tiny_graph, prop)
    assert verdict.value == "FALSE"
    trace = verdict.witness
    at = tiny_graph.initial
    for label, dst in trace.steps:
        assert (label, dst) in tiny_graph.edges[at]
        at = dst
    # the endpoint actually satisfies the offending predicate
    model = tiny_graph.model
    info = model.nodes["e2"]
    proc = model.processes[info.process]
    state = tiny_graph.states[at]
    assert state[proc.loc_cell] == proc.loc_index("done")


def test_nondeterminism_breaks_leadsto(action_graph):
    prop, = parse_properties(
        "property p is node(a)@tick_node leadsto terminal(success)"
        " within [0,5]")
    verdict = check(action_graph, prop)
    assert verdict.value == "FALSE"
    assert verdict.witness is not None


def test_absent_is_negation_of_present(action_graph):
    for pred in ("node(a)@running", "node(a)@halted", "terminal(failure)",
                 "rstatus(a) = running"):
        a, = parse_properties(f"property a is absent {pred}")
        p, = parse_properties(f"property p is present {pred}")
        va, vp = check(action_graph, a), check(action_graph, p)
        assert {va.value, vp.value} == {"TRUE", "FALSE"}


def test_default_suite_shape(action_graph):
    props = default_properties(action_graph.model)
    names = {p.name for p in props}
    assert "a_can_succeed" in names
    assert "a_can_fail" in names
    assert "a_can_run_long" in names
    assert any(p.kind == "deadlockfree" for p in props)
    results = check_all(action_graph, props)
    by_name = {v.prop.name: v.value for v in results}
    assert by_name["a_can_succeed"] == "TRUE"
    assert by_name["a_can_fail"] == "TRUE"
    # a bare root action is never halted by anyone
    assert by_name["a_can_be_halted"] == "FALSE"


def test_corpus_property_files_parse():
    for name in ("recovery.props", "roundrobin.props", "mars_rover.props",
                 "drone.props", "drone_timed.props"):
        props = parse_properties(corpus_text(name))
        assert props
        assert all(p.expect in (True, False) for p in props)
