import pytest

from btverify.parser import ParseError, parse_btf
from btverify.syntax import (
    Add,
    ArgRef,
    Assign,
    Eq,
    Literal,
    Mul,
    Not,
    NodeKind,
    StatusRef,
)


def tree(text):
    return parse_btf(text).trees[0]


def test_minimal_tree():
    spec = parse_btf("((BehaviorTree (Action :ID go)))")
    assert len(spec.trees) == 1
    root = spec.trees[0]
    assert root.kind is NodeKind.BEHAVIOR_TREE
    assert root.children[0].kind is NodeKind.ACTION
    assert root.children[0].id_attr == "go"


def test_comments_and_whitespace():
    spec = parse_btf("""
    ; leading comment
    ((BehaviorTree ; trailing
      (Condition :ID ok)))  ; done
    """)
    assert spec.trees[0].children[0].kind is NodeKind.CONDITION


def test_attrs_parse_types():
    node = tree("((BehaviorTree (Parallel :success 2 :wait 1 :halt 0"
                " (Action :ID a) (Action :ID b) (Action :ID c))))").children[0]
    assert node.attrs["success"] == 2
    assert node.attrs["wait"] == 1
    assert node.attrs["halt"] == 0


def test_bare_flag_attr():
    node = tree("((BehaviorTree (Action :name a :SF)))").children[0]
    assert node.attrs["SF"] is True


def test_args_list_pairs():
    node = tree("((BehaviorTree (Action :ID goto"
                " :args (x -3 y 2.5 z (* 2 $fls)))))").children[0]
    args = dict(node.attrs["args"])
    assert args["x"] == -3
    assert args["y"] == 2.5
    assert isinstance(args["z"], Mul)
    assert args["z"].right == ArgRef("fls")


def test_defsv_enumerated():
    spec = parse_btf("""
    ((defsv battery :states (Good Low) :init Good :transitions :all)
     (BehaviorTree (Action :ID a)))
    """)
    decl = spec.svs[0]
    assert decl.is_enumerated
    assert decl.states == ["Good", "Low"]
    assert decl.init == "Good"


def test_defsv_bounded_int():
    spec = parse_btf("""
    ((defsv fls :init 0 :min 0 :max 3)
     (BehaviorTree (Action :ID a)))
    """)
    decl = spec.svs[0]
    assert not decl.is_enumerated
    assert (decl.min, decl.max, decl.init) == (0, 3, 0)


def test_defsv_explicit_transitions():
    spec = parse_btf("""
    ((defsv m :states (A B) :init A :transitions ((A B) (B A)))
     (BehaviorTree (Action :ID a)))
    """)
    assert spec.svs[0].transitions == [("A", "B"), ("B", "A")]


def test_eval_expressions():
    node = tree("((BehaviorTree (Eval (~ (= battery critical)))))").children[0]
    assert isinstance(node.expr, Not)
    assert isinstance(node.expr.operand, Eq)
    # Identifier resolution (SV vs enum literal) happens during validation.
    assert node.expr.operand.left == Literal("battery")

    node = tree("((BehaviorTree (Eval (:= fls (+ 1 fls)))))").children[0]
    assert isinstance(node.expr, Assign)
    assert node.expr.sv_name == "fls"
    assert isinstance(node.expr.value, Add)


def test_status_ref():
    node = tree("((BehaviorTree (Eval (= cam.rstatus success))))").children[0]
    assert node.expr.left == StatusRef("cam")


@pytest.mark.parametrize("bad", [
    "",
    "(",
    "((BehaviorTree)",
    "((UnknownKind))",
    "((BehaviorTree (Action :ID a)) extra)",
])
def test_errors_are_parse_errors(bad):
    with pytest.raises(ParseError):
        parse_btf(bad)


def test_error_carries_position():
    with pytest.raises(ParseError) as err:
        parse_btf("((BehaviorTree\n  (Nope)))")
    assert "2" in str(err.value)
