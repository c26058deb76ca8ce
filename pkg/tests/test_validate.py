import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btverify import ParseError, ValidationFailed, parse_btf, validate
from btverify.validate import ast_key, emit_canonical

from conftest import corpus_text


BASIC = """
((defsv b :states (G L) :init G :transitions :all)
 (BehaviorTree :name t
  (Fallback :name f
   (Sequence :name s (Condition :SF :name c) (SetSV :name set :sv b))
   (Action :ID go)
   (Action :ID go))))
"""


def test_canonical_names_and_suffixes():
    v = validate(parse_btf(BASIC))
    names = list(v.nodes_by_name)
    assert names[:5] == ["t", "f", "s", "c", "set"]
    # Repeated :ID nodes get distinct pre-order suffixes.
    assert names[5:] == ["go_btn6", "go_btn7"]


def test_sv_classification():
    v = validate(parse_btf(BASIC))
    assert v.program_svs == {"b"}
    assert v.environment_svs == set()

    v = validate(parse_btf("""
    ((defsv m :states (A B) :init A :transitions :all)
     (BehaviorTree (Eval (= m B))))
    """))
    # Read-only SVs evolve on their own.
    assert v.environment_svs == {"m"}
    assert v.program_svs == set()


@pytest.mark.parametrize("bad, fragment", [
    ("((BehaviorTree (Action :name a) (Action :name a)))", "duplicate"),
    ("((BehaviorTree (Parallel :success 3 (Action :ID a) (Action :ID b))))",
     "outside"),
    ("((BehaviorTree (Eval (:= nosuch 1))))", "undeclared"),
    ("((defsv b :states (G L) :init X :transitions :all)"
     " (BehaviorTree (Action :ID a)))", "not a declared state"),
    ("((BehaviorTree (Inverter :name i)))", "exactly 1 child"),
])
def test_rejections(bad, fragment):
    with pytest.raises(ValidationFailed) as err:
        validate(parse_btf(bad))
    assert fragment in str(err.value)


@pytest.mark.parametrize("name", [
    "recovery.btf", "roundrobin.btf", "mars_rover.btf", "drone.btf",
    "drone_simple.btf", "nav2.btf",
])
def test_corpus_round_trips(name):
    v = validate(parse_btf(corpus_text(name)))
    text = emit_canonical(v)
    v2 = validate(parse_btf(text))
    assert ast_key(v.spec) == ast_key(v2.spec)
    # Canonical form is a fixed point.
    assert emit_canonical(v2) == text


# Fuzz: arbitrary bytes must produce ParseError, never anything else.
@settings(max_examples=300, deadline=None)
@given(st.text(max_size=200))
def test_parser_total_on_garbage(text):
    try:
        parse_btf(text)
    except ParseError:
        pass


# Fuzz: structurally plausible trees either validate or fail cleanly.
_leaf = st.sampled_from(
    ["(Action :ID a)", "(Condition :ID c)", "(Eval (= 1 1))"])


def _combine(children):
    kind = ["Sequence", "Fallback", "ReactiveSequence", "Inverter",
            "Parallel :success 1"]
    return st.sampled_from(kind).map(
        lambda k: "(" + k + " " + " ".join(children) + ")")


_tree = st.recursive(_leaf, lambda inner: st.lists(
    inner, min_size=1, max_size=3).flatmap(_combine), max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(_tree)
def test_generated_trees_validate_or_fail_cleanly(body):
    text = "((BehaviorTree " + body + "))"
    try:
        v = validate(parse_btf(text))
    except ValidationFailed:
        return
    assert ast_key(v.spec) == ast_key(
        validate(parse_btf(emit_canonical(v))).spec)
