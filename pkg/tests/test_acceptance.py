"""End-to-end acceptance suite. Each test is one pass/fail line."""

import itertools
import time

from btverify import (
    ActionProvider,
    RunConfig,
    ScriptedProvider,
    check,
    compile_model,
    emit_trace,
    enumerate_behaviors,
    explore,
    parse_btf,
    parse_properties,
    run,
    validate,
)
from btverify.interp import ScriptDecider, Interpreter
from btverify.props import check_all, compile_predicate, default_properties

from conftest import build, corpus_text, load_model, load_spec


def _assert_witness_replays(graph, verdict, prop):
    """A counterexample must be a real path of the graph whose endpoint
    satisfies the offending predicate."""
    trace = verdict.witness
    assert trace is not None
    at = graph.initial
    for label, dst in trace.steps:
        assert (label, dst) in graph.edges[at]
        at = dst
    pred = compile_predicate(prop.p, graph.model)
    assert pred(graph.states[at])


def _verdicts(graph, props_text):
    props = parse_properties(props_text)
    return props, check_all(graph, props)


def test_mars_rover_unsafe_panel_state_is_reachable():
    t0 = time.perf_counter()
    model = load_model("mars_rover.btf")
    graph = explore(model, max_states=500_000)
    props, results = _verdicts(graph, corpus_text("mars_rover.props"))
    elapsed = time.perf_counter() - t0
    verdict = results[0]
    assert verdict.prop.name == "panels_storm"
    assert verdict.value == "FALSE"
    _assert_witness_replays(graph, verdict, verdict.prop)
    assert len(graph.states) < 500_000
    assert elapsed < 60.0


def test_recovery_property_suite_verdicts():
    t0 = time.perf_counter()
    graph = explore(load_model("recovery.btf"))
    _, results = _verdicts(graph, corpus_text("recovery.props"))
    assert [v.value for v in results] == ["TRUE", "FALSE", "TRUE", "TRUE"]
    assert time.perf_counter() - t0 < 10.0


def test_roundrobin_property_suite_verdicts():
    t0 = time.perf_counter()
    graph = explore(load_model("roundrobin.btf"))
    _, results = _verdicts(graph, corpus_text("roundrobin.props"))
    assert [v.value for v in results] == ["FALSE", "TRUE", "TRUE", "TRUE"]
    assert time.perf_counter() - t0 < 10.0


def test_drone_halt_reachability(drone_graph):
    suite = {p.name: p for p in default_properties(drone_graph.model)}

    def haltable(node):
        return check(drone_graph, suite[f"{node}_can_be_halted"]).value

    # the startup actions are never halted by anyone
    assert haltable("start_drone") == "FALSE"
    assert haltable("start_camera") == "FALSE"
    # under the reactive safety layer, every branch after the first can be
    # pre-empted; the first branch cannot
    assert haltable("rseq_battery") == "FALSE"
    assert haltable("rseq_localization") == "TRUE"
    assert haltable("rseq_mission") == "TRUE"


def test_drone_named_properties(drone_graph):
    props, results = _verdicts(drone_graph, corpus_text("drone.props"))
    outcome = {v.prop.name: v.value for v in results}
    assert outcome == {p.name: "TRUE" for p in props}, outcome


def test_timed_landing_bound_under_per_node_ticks(drone_graph_all_nodes):
    _, results = _verdicts(drone_graph_all_nodes,
                           corpus_text("drone_timed.props"))
    assert [v.value for v in results] == ["TRUE"]


def _differential_seeded(name, seeds, max_ticks=25):
    """Engine, interpreter and offline model must agree on every run."""
    vspec = load_spec(name)
    model = compile_model(vspec)
    for seed in seeds:
        provider = ScriptedProvider(model, seed=seed)
        res = run(model, provider, RunConfig(tick_ms=0, max_ticks=max_ticks,
                                             seed=seed))
        interp = Interpreter(vspec, ScriptDecider(vspec, seed=seed))
        events, status = interp.run(max_ticks)
        assert res.trace.observables() == events, (name, seed)
        # every engine step is a transition of the verification model
        at = res.states[0]
        for label, nxt in zip(res.labels, res.states[1:]):
            assert any(l == label and s == nxt
                       for l, s in model.successors(at)), (name, seed)
            at = nxt


def _differential_exhaustive(name, max_ticks=3):
    vspec = load_spec(name)
    model = compile_model(vspec)
    graph = explore(model)
    for script, events, _status in enumerate_behaviors(vspec, max_ticks):
        provider = ScriptedProvider(model, script=script)
        res = run(model, provider,
                  RunConfig(tick_ms=0, max_ticks=max_ticks))
        assert res.trace.observables() == events, (name, script.dump())
        at = graph.index[res.states[0]]
        for label, nxt in zip(res.labels, res.states[1:]):
            j = graph.index[nxt]
            assert (label, j) in graph.edges[at], (name, script.dump())
            at = j


def test_three_way_semantic_agreement():
    trees = ["recovery.btf", "roundrobin.btf", "mars_rover.btf",
             "drone_simple.btf", "nav2.btf", "drone.btf"]
    for name in trees:
        _differential_seeded(name, range(1000))
    # exhaustive short runs on the small trees
    for name in ("recovery.btf", "roundrobin.btf", "mars_rover.btf"):
        _differential_exhaustive(name)


def test_parallel_threshold_exhaustive_oracle():
    t0 = time.perf_counter()
    for n in range(1, 5):
        for m in range(1, n + 1):
            for outcome in itertools.product((True, False), repeat=n):
                leaves = " ".join(
                    "(Eval (= 1 1))" if ok else "(Eval (= 1 2))"
                    for ok in outcome)
                model = build(
                    f"((BehaviorTree (Parallel :success {m} {leaves})))")
                graph = explore(model)
                finals = {model.terminal_status(s) for s in graph.states
                          if model.is_terminal(s)}
                want = "success" if sum(outcome) >= m else "failure"
                assert {s.name.lower() for s in finals} == {want}, \
                    (n, m, outcome)
    assert time.perf_counter() - t0 < 1.0


class _StuckNavigation(ActionProvider):
    """Immediate results everywhere except navigation, which never ends."""

    def start_action(self, node_name, id_attr, args):
        return id_attr

    def poll(self, handle):
        return None if handle == "goto_waypoint" else "success"


def test_realtime_pacing_50_ticks_at_100ms():
    model = load_model("drone.btf")
    t0 = time.perf_counter()
    res = run(model, _StuckNavigation(),
              RunConfig(tick_ms=100.0, max_ticks=50))
    elapsed = time.perf_counter() - t0
    assert res.ticks == 50
    assert 4.5 <= elapsed <= 5.5, elapsed
    starts = {}
    for event in res.trace.events:
        starts.setdefault(event.tick, event.ts_ms)
    ts = [starts[t] for t in sorted(starts)]
    assert ts == sorted(ts)
    deltas = [b - a for a, b in zip(ts, ts[1:])]
    assert all(abs(d - 100.0) < 50.0 for d in deltas), deltas


def test_repeatability_of_reports_and_traces():
    model = load_model("recovery.btf")
    reports = []
    for _ in range(2):
        graph = explore(model)
        props = parse_properties(corpus_text("recovery.props"))
        reports.append("\n".join(
            v.report_line() for v in check_all(graph, props)))
    assert reports[0] == reports[1]

    drone = load_model("drone.btf")
    traces = []
    for _ in range(2):
        res = run(drone, ScriptedProvider(drone, seed=11),
                  RunConfig(tick_ms=0, max_ticks=40, seed=11))
        traces.append(emit_trace(res.trace, "jsonl"))
    assert traces[0] == traces[1]
