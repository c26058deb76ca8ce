import pytest

from btverify import (
    ActionProvider,
    ProviderError,
    RunConfig,
    ScriptedProvider,
    emit_trace,
    parse_script,
    run,
)
from btverify.runtime import ScriptError, parse_trace_jsonl

from conftest import build


ACTION = build("((BehaviorTree (Action :name a)))")


def scripted(model, text, **cfg):
    provider = ScriptedProvider(model, script=parse_script(text))
    return run(model, provider, RunConfig(tick_ms=0, **cfg))


def test_script_parse_dump_round_trip():
    text = """\
# mission rehearsal
node a ordinal 1 -> success latency 2
node a ordinal 2 -> failure latency 0
condition ok ordinal 1 -> failure
setsv battery ordinal 1 -> Low
env meteo tick 3 -> Storm
"""
    script = parse_script(text)
    assert parse_script(script.dump()).dump() == script.dump()


@pytest.mark.parametrize("bad", [
    "node a -> success",
    "node a ordinal 1 -> maybe latency 0",
    "env m tick x -> A",
    "frobnicate a ordinal 1 -> success",
])
def test_script_rejections(bad):
    with pytest.raises(ScriptError):
        parse_script(bad)


def test_latency_yields_running_ticks():
    res = scripted(ACTION, "node a ordinal 1 -> success latency 2",
                   max_ticks=10)
    assert res.final == "success"
    assert res.ticks == 3
    returned = [e for e in res.trace.observables() if e[:2] == ("returned", "a")]
    assert returned == [("returned", "a", "running")] * 2 + [
        ("returned", "a", "success")]


def test_zero_latency_is_synchronous():
    res = scripted(ACTION, "node a ordinal 1 -> failure latency 0",
                   max_ticks=10)
    assert res.final == "failure"
    assert res.ticks == 1


def test_default_provider_is_permissive():
    res = run(ACTION, ActionProvider(), RunConfig(tick_ms=0, max_ticks=5))
    assert res.final == "success"


def test_max_ticks_stops_run():
    res = scripted(ACTION, "node a ordinal 1 -> success latency 99",
                   max_ticks=4)
    assert res.final == "stopped"
    assert res.ticks == 4


def test_halted_child_gets_halt_action_once():
    model = build("""
    ((BehaviorTree (Parallel :success 1 :halt 1
      (Action :name fast) (Action :name slow))))
    """)
    res = scripted(model, """
    node fast ordinal 1 -> success latency 0
    node slow ordinal 1 -> success latency 50
    """, max_ticks=20)
    assert res.final == "success"
    halts = [e for e in res.trace.observables() if e[0] == "halted"]
    assert halts.count(("halted", "slow")) == 1


def test_illegal_setsv_value_is_provider_error():
    model = build("""
    ((defsv b :states (Good Low) :init Good :transitions ((Good Low)))
     (BehaviorTree (SetSV :name m :sv b)))
    """)
    with pytest.raises(ProviderError):
        scripted(model, "setsv b ordinal 1 -> Bogus", max_ticks=5)


def test_seeded_virtual_runs_are_reproducible():
    for seed in (0, 7):
        runs = [run(ACTION, ScriptedProvider(ACTION, seed=seed),
                    RunConfig(tick_ms=0, max_ticks=30, seed=seed))
                for _ in range(2)]
        a, b = (emit_trace(r.trace, "jsonl") for r in runs)
        assert a == b


def test_jsonl_round_trip():
    res = scripted(ACTION, "node a ordinal 1 -> success latency 1",
                   max_ticks=10)
    again = parse_trace_jsonl(emit_trace(res.trace, "jsonl"))
    assert again.observables() == res.trace.observables()


def test_lines_format_mentions_every_tick():
    res = scripted(ACTION, "node a ordinal 1 -> success latency 2",
                   max_ticks=10)
    text = emit_trace(res.trace, "lines").decode()
    for tick in (1, 2, 3):
        assert f"tick={tick} " in text
