from btverify import (
    RunConfig,
    ScriptedProvider,
    enumerate_behaviors,
    parse_btf,
    parse_script,
    run,
    validate,
)
from btverify.interp import interpret_run

from conftest import build, load_spec


def agree(text, script_text, max_ticks=20):
    """Run the compiled model and the direct tree interpreter on the same
    script and compare their observable event streams."""
    vspec = validate(parse_btf(text))
    script = parse_script(script_text)
    events, status = interpret_run(vspec, script=script, max_ticks=max_ticks)

    from btverify import compile_model
    model = compile_model(vspec)
    provider = ScriptedProvider(model, script=parse_script(script_text))
    res = run(model, provider, RunConfig(tick_ms=0, max_ticks=max_ticks))
    assert res.trace.observables() == events
    assert res.final == status
    return status


def test_action_latency_agreement():
    status = agree("((BehaviorTree (Action :name a)))",
                   "node a ordinal 1 -> success latency 2")
    assert status == "success"


def test_sequence_memory_agreement():
    text = """
    ((BehaviorTree (Sequence :name s
      (Action :name a) (Action :name b))))
    """
    agree(text, """
    node a ordinal 1 -> success latency 1
    node b ordinal 1 -> failure latency 1
    """)


def test_reactive_sequence_reticks_from_start():
    text = """
    ((BehaviorTree (ReactiveSequence :name s
      (Condition :name c) (Action :name a))))
    """
    status = agree(text, """
    condition c ordinal 1 -> success
    condition c ordinal 2 -> success
    condition c ordinal 3 -> failure
    node a ordinal 1 -> success latency 5
    """)
    # the condition flipping to failure pre-empts the running action
    assert status == "failure"


def test_parallel_halt_agreement():
    text = """
    ((BehaviorTree (Parallel :success 1 :halt 1
      (Action :name fast) (Action :name slow))))
    """
    agree(text, """
    node fast ordinal 1 -> success latency 1
    node slow ordinal 1 -> success latency 40
    """)


def test_env_sv_schedule_agreement():
    text = """
    ((defsv m :states (Calm Storm) :init Calm :transitions :all)
     (BehaviorTree (Fallback
       (Inverter (Eval :name chk (= m Storm)))
       (Action :name react))))
    """
    agree(text, """
    env m tick 2 -> Storm
    node react ordinal 1 -> success latency 0
    """, max_ticks=5)


def test_setsv_agreement():
    text = """
    ((defsv b :states (Good Low) :init Good :transitions ((Good Low) (Low Low)))
     (BehaviorTree (Sequence
       (SetSV :name meas :sv b)
       (Eval :name chk (= b Low)))))
    """
    status = agree(text, "setsv b ordinal 1 -> Low")
    assert status == "success"


def test_enumeration_covers_all_short_runs():
    vspec = load_spec("recovery.btf")
    behaviors = enumerate_behaviors(vspec, 3)
    scripts = [b[0].dump() for b in behaviors]
    assert len(scripts) == len(set(scripts)), "duplicate behavior scripts"
    statuses = {b[2] for b in behaviors}
    assert statuses >= {"success", "failure"}


def test_enumerated_scripts_replay_identically():
    vspec = load_spec("recovery.btf")
    from btverify import compile_model
    model = compile_model(vspec)
    for script, events, status in enumerate_behaviors(vspec, 3):
        provider = ScriptedProvider(model, script=script)
        res = run(model, provider, RunConfig(tick_ms=0, max_ticks=3))
        assert res.trace.observables() == events
        final = status if status in ("success", "failure") else "stopped"
        assert res.final == final
