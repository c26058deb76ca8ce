from btverify import Status, explore
from btverify.model import ONE_TICK

from conftest import build, load_model


def terminal_statuses(model):
    """Explore and collect the set of statuses at terminal sink states."""
    graph = explore(model)
    out = set()
    for state in graph.states:
        if model.is_terminal(state):
            out.add(model.terminal_status(state))
    return out


def deterministic_outcome(body):
    """Build a tree whose leaves are all deterministic and return its
    single terminal status."""
    statuses = terminal_statuses(build("((BehaviorTree %s))" % body))
    assert len(statuses) == 1, statuses
    return statuses.pop()


T = "(Eval (= 1 1))"   # always succeeds
F = "(Eval (= 1 2))"   # always fails


def test_process_inventory():
    model = load_model("drone.btf")
    # one process per tree node, per state variable, plus the ticker
    n_nodes = len(model.nodes)
    n_svs = len(model.svs)
    assert len(model.processes) == n_nodes + n_svs + 1 == 41


def test_node_locations():
    model = build("((BehaviorTree (Action :name a)))")
    proc = model.processes[model.nodes["a"].process]
    assert proc.locations[:2] == ["start_", "tick_node"]
    for loc in ("success", "failure", "running", "halted", "done", "halt"):
        assert loc in proc.locations


def _delayed(model):
    out = set()
    for proc in model.processes:
        for t in proc.transitions:
            if t.timing == ONE_TICK:
                out.add((proc.name, proc.locations[t.src]))
    return out


def test_tick_semantics_delay_placement():
    text = "((BehaviorTree (Sequence :name s (Action :name a))))"
    root_only = _delayed(build(text))
    assert root_only == {("ticker", "idle")}

    leaves = _delayed(build(text, tick_semantics="leaves"))
    assert ("a", "tick_node") in leaves
    assert ("s", "tick_node") not in leaves

    all_nodes = _delayed(build(text, tick_semantics="all"))
    assert ("a", "tick_node") in all_nodes
    assert ("s", "tick_node") in all_nodes


def test_sequence_and_fallback():
    assert deterministic_outcome(f"(Sequence {T} {T})") is Status.SUCCESS
    assert deterministic_outcome(f"(Sequence {T} {F})") is Status.FAILURE
    assert deterministic_outcome(f"(Fallback {F} {T})") is Status.SUCCESS
    assert deterministic_outcome(f"(Fallback {F} {F})") is Status.FAILURE


def test_decorators():
    assert deterministic_outcome(f"(Inverter {T})") is Status.FAILURE
    assert deterministic_outcome(f"(Inverter {F})") is Status.SUCCESS
    assert deterministic_outcome(f"(ForceSuccess {F})") is Status.SUCCESS
    assert deterministic_outcome(f"(ForceFailure {T})") is Status.FAILURE


def test_repeat_counts_ticks():
    model = build("""
    ((defsv n :init 0 :min 0 :max 5)
     (BehaviorTree (Repeat :repeat 3 (Eval (:= n (+ n 1))))))
    """)
    graph = explore(model)
    slot = model.svs["n"]
    finals = {slot.decode(state[slot.cell])
              for state in graph.states if model.is_terminal(state)}
    assert finals == {3}


def test_parallel_smoke():
    assert deterministic_outcome(
        f"(Parallel :success 1 {T} {F})") is Status.SUCCESS
    assert deterministic_outcome(
        f"(Parallel :success 2 {T} {F})") is Status.FAILURE


def test_nondeterministic_action_branches():
    # A bare Action can succeed, fail, or run forever.
    statuses = terminal_statuses(build("((BehaviorTree (Action :name a)))"))
    assert statuses == {Status.SUCCESS, Status.FAILURE}


def test_sf_leaf_never_runs():
    model = build("((BehaviorTree (Action :SF :name a)))")
    labels = {t.label for p in model.processes for t in p.transitions}
    assert "outcome_running" not in labels


def test_environment_sv_frozen_at_terminal(mars_rover_graph):
    # Once the run has ended, nothing moves: terminal states only loop.
    graph = mars_rover_graph
    model = graph.model
    seen = 0
    for i, state in enumerate(graph.states):
        if model.is_terminal(state):
            seen += 1
            assert all(dst == i for _, dst in graph.edges[i])
    assert seen > 0


def test_urgent_transitions_terminate():
    # No urgent cycle may exist: time must always be able to advance.
    from btverify.explore import urgent_cycles
    for name in ("recovery.btf", "roundrobin.btf", "mars_rover.btf"):
        model = load_model(name)
        assert urgent_cycles(explore(model)) == []
