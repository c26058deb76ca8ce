"""Semantic validation, canonical naming, and canonical pretty-printing."""

from __future__ import annotations

from dataclasses import dataclass, field

from .syntax import (
    ALL_PAIRS,
    Add,
    ArgRef,
    Assign,
    BtSpec,
    CONTROL_KINDS,
    DECORATOR_KINDS,
    Eq,
    Expr,
    LEAF_KINDS,
    Literal,
    Mul,
    NodeAst,
    NodeKind,
    Not,
    StatusRef,
    SvDecl,
    SvRef,
)

# Attributes with defined meaning; anything else is preserved but warned about.
KNOWN_ATTRS = {
    "ID", "name", "args", "success", "wait", "halt", "repeat",
    "num_retries", "num_attempts", "sv", "SV", "hz", "SF",
}

STATUS_LITERALS = ("success", "failure", "running")


@dataclass
class SemanticError:
    path: str
    reason: str

    def __str__(self):
        return f"{self.path}: {self.reason}"


class ValidationFailed(Exception):
    def __init__(self, errors):
        self.errors = errors
        super().__init__("; ".join(str(e) for e in errors))


@dataclass
class ValidatedSpec:
    spec: BtSpec
    nodes_by_name: dict[str, NodeAst]
    program_svs: set[str]
    environment_svs: set[str]
    warnings: list[str] = field(default_factory=list)

    @property
    def svs(self):
        return self.spec.svs

    @property
    def trees(self):
        return self.spec.trees

    def tree(self, name=None):
        return self.spec.tree(name)

    def tree_nodes(self, tree):
        return list(tree.walk())


def _check_sv_decl(decl: SvDecl, errors):
    path = f"defsv {decl.name}"
    if decl.is_enumerated:
        if not decl.states:
            errors.append(SemanticError(path, "enumeration has no states"))
            return
        if len(set(decl.states)) != len(decl.states):
            errors.append(SemanticError(path, "duplicate state names"))
        if decl.init not in decl.states:
            errors.append(SemanticError(path, f"init {decl.init!r} is not a declared state"))
        if decl.transitions != ALL_PAIRS:
            for a, b in decl.transitions:
                if a not in decl.states or b not in decl.states:
                    errors.append(SemanticError(
                        path, f"transition ({a} {b}) references undeclared states"))
    else:
        if decl.min > decl.max:
            errors.append(SemanticError(path, f"min {decl.min} exceeds max {decl.max}"))
        if not isinstance(decl.init, int) or not decl.min <= decl.init <= decl.max:
            errors.append(SemanticError(
                path, f"init {decl.init!r} outside [{decl.min}, {decl.max}]"))


def _arity_ok(node: NodeAst, errors, path):
    kind = node.kind
    n = len(node.children)
    if kind in LEAF_KINDS:
        if n != 0:
            errors.append(SemanticError(path, f"{kind.value} takes no children, got {n}"))
    elif kind is NodeKind.RECOVERY:
        if n != 2:
            errors.append(SemanticError(path, f"Recovery requires exactly 2 children, got {n}"))
    elif kind in DECORATOR_KINDS:
        if n != 1:
            errors.append(SemanticError(path, f"{kind.value} requires exactly 1 child, got {n}"))
    elif kind is NodeKind.BEHAVIOR_TREE:
        if n != 1:
            errors.append(SemanticError(path, f"BehaviorTree requires exactly 1 child, got {n}"))
    elif n < 1:
        errors.append(SemanticError(path, f"{kind.value} requires at least 1 child"))


def _norm_enum_literal(decl: SvDecl, text):
    """Enumeration literals match case-insensitively, normalized to declared case."""
    for state in decl.states:
        if state.lower() == str(text).lower():
            return state
    return None


class _ExprChecker:
    """Resolves names and type-checks an Eval expression in place."""

    def __init__(self, vspec: "_Context", path, errors):
        self.ctx = vspec
        self.path = path
        self.errors = errors

    def error(self, reason):
        self.errors.append(SemanticError(self.path, reason))

    def check_top(self, expr):
        if isinstance(expr, Assign):
            return self.check_assign(expr)
        typ, expr = self.check(expr)
        if typ not in ("bool", "error"):
            self.error("Eval expression must be a condition or an assignment")
        return expr

    def check_assign(self, expr: Assign):
        decl = self.ctx.sv_decls.get(expr.sv_name)
        if decl is None:
            self.error(f"assignment to undeclared state variable '{expr.sv_name}'")
            return expr
        typ, value = self.check(expr.value, expect_enum=decl if decl.is_enumerated else None)
        if decl.is_enumerated:
            if typ not in (f"enum:{decl.name}", "error"):
                self.error(f"cannot assign {typ} value to enumeration '{decl.name}'")
        elif typ not in ("int", "error"):
            self.error(f"cannot assign {typ} value to bounded integer '{decl.name}'")
        return Assign(expr.sv_name, value)

    def check(self, expr, expect_enum=None):
        """Returns (type, resolved expr); type is int | bool | status |
        enum:<sv> | error."""
        if isinstance(expr, Literal):
            if isinstance(expr.value, int) and not isinstance(expr.value, bool):
                return "int", expr
            if isinstance(expr.value, float):
                self.error("floating point values are not allowed in expressions")
                return "error", expr
            name = expr.value
            if name in self.ctx.sv_decls:
                decl = self.ctx.sv_decls[name]
                self.ctx.referenced_svs.add(name)
                typ = f"enum:{name}" if decl.is_enumerated else "int"
                return typ, SvRef(name)
            if expect_enum is not None:
                norm = _norm_enum_literal(expect_enum, name)
                if norm is not None:
                    return f"enum:{expect_enum.name}", Literal(norm)
            if name in STATUS_LITERALS:
                return "status", expr
            self.error(f"unresolved identifier '{name}' in expression")
            return "error", expr
        if isinstance(expr, SvRef):
            decl = self.ctx.sv_decls.get(expr.name)
            if decl is None:
                self.error(f"undeclared state variable '{expr.name}'")
                return "error", expr
            self.ctx.referenced_svs.add(expr.name)
            return (f"enum:{expr.name}" if decl.is_enumerated else "int"), expr
        if isinstance(expr, StatusRef):
            self.ctx.status_refs.append((self.path, expr.node_name))
            return "status", expr
        if isinstance(expr, ArgRef):
            self.error("'$' references are only allowed in :args values")
            return "error", expr
        if isinstance(expr, Eq):
            # Resolve the side that names an SV first so enum literals on the
            # other side can be matched against its declaration.
            lt, left = self.check(expr.left)
            enum_decl = None
            if lt.startswith("enum:"):
                enum_decl = self.ctx.sv_decls[lt.split(":", 1)[1]]
            rt, right = self.check(expr.right, expect_enum=enum_decl)
            if lt == "status" and isinstance(right, Literal) and right.value in STATUS_LITERALS:
                rt = "status"
            if "error" not in (lt, rt) and lt != rt:
                self.error(f"cannot compare {lt} with {rt}")
            return "bool", Eq(left, right)
        if isinstance(expr, Not):
            typ, operand = self.check(expr.operand)
            if typ not in ("bool", "error"):
                self.error("'~' requires a condition operand")
            return "bool", Not(operand)
        if isinstance(expr, Assign):
            self.error("assignment must be the entire Eval expression")
            return "error", expr
        if isinstance(expr, (Add, Mul)):
            lt, left = self.check(expr.left)
            rt, right = self.check(expr.right)
            for typ in (lt, rt):
                if typ not in ("int", "error"):
                    self.error(f"arithmetic requires integer operands, got {typ}")
            rebuilt = Add if isinstance(expr, Add) else Mul
            return "int", rebuilt(left, right)
        self.error(f"unsupported expression {expr!r}")
        return "error", expr


class _Context:
    def __init__(self, spec):
        self.sv_decls = {decl.name: decl for decl in spec.svs}
        self.referenced_svs = set()
        self.assigned_svs = set()
        self.status_refs = []  # (path, node_name) resolved after naming


def _node_path(tree_name, ancestors, node):
    parts = [tree_name] + [a.canonical_name or a.kind.value for a in ancestors]
    parts.append(node.canonical_name or node.kind.value)
    return "/".join(parts)


def validate(spec: BtSpec) -> ValidatedSpec:
    """Validate a parsed BtSpec; raises ValidationFailed listing every problem."""
    errors = []
    warnings = []
    ctx = _Context(spec)

    if len(ctx.sv_decls) != len(spec.svs):
        errors.append(SemanticError("document", "duplicate state variable names"))
    for decl in spec.svs:
        _check_sv_decl(decl, errors)

    tree_names = [t.attrs.get("name") or t.attrs.get("ID") for t in spec.trees]
    if len(set(tree_names)) != len(tree_names):
        errors.append(SemanticError("document", "tree names are not unique"))

    # Canonical naming over the whole document: 1-based pre-order index,
    # continuing across trees so names stay unique document-wide.
    index = 0
    nodes_by_name = {}
    explicit_names = set()
    for tree in spec.trees:
        for node in tree.walk():
            index += 1
            node.index = index
            name = node.attrs.get("name")
            if name is not None:
                if name in explicit_names:
                    errors.append(SemanticError(
                        str(node.pos), f"duplicate :name '{name}'"))
                explicit_names.add(name)
                node.canonical_name = str(name)
            elif node.id_attr is not None:
                node.canonical_name = f"{node.id_attr}_btn{index}"
            else:
                node.canonical_name = f"{node.kind.value}{index}_btn{index}"
            if node.canonical_name in nodes_by_name:
                errors.append(SemanticError(
                    str(node.pos), f"duplicate node name '{node.canonical_name}'"))
            nodes_by_name[node.canonical_name] = node

    for tree, tree_name in zip(spec.trees, tree_names):
        stack = [(tree, [])]
        while stack:
            node, ancestors = stack.pop()
            path = _node_path(tree_name or "tree", ancestors, node)
            _arity_ok(node, errors, path)
            _check_node_attrs(node, ctx, path, errors, warnings)
            if node.kind is NodeKind.EVAL and node.expr is not None:
                checker = _ExprChecker(ctx, path, errors)
                node.expr = checker.check_top(node.expr)
                if isinstance(node.expr, Assign):
                    ctx.assigned_svs.add(node.expr.sv_name)
            for child in reversed(node.children):
                stack.append((child, ancestors + [node]))

    for path, node_name in ctx.status_refs:
        if node_name not in nodes_by_name:
            errors.append(SemanticError(
                path, f"'.rstatus' reference to unknown node '{node_name}'"))

    if errors:
        raise ValidationFailed(errors)

    program = set(ctx.assigned_svs)
    environment = set(ctx.sv_decls) - program
    return ValidatedSpec(
        spec=spec,
        nodes_by_name=nodes_by_name,
        program_svs=program,
        environment_svs=environment,
        warnings=warnings,
    )


def _check_node_attrs(node: NodeAst, ctx, path, errors, warnings):
    for key in node.attrs:
        if key not in KNOWN_ATTRS:
            warnings.append(f"{path}: unknown attribute :{key} preserved")

    kind = node.kind
    if kind is NodeKind.PARALLEL:
        n = len(node.children)
        m = node.attrs.get("success")
        if not isinstance(m, int):
            errors.append(SemanticError(path, "Parallel requires an integer :success threshold"))
        elif not 1 <= m <= n:
            errors.append(SemanticError(
                path, f":success {m} outside 1..{n} for {n} children"))
    if kind is NodeKind.REPEAT:
        k = node.attrs.get("repeat")
        if not isinstance(k, int) or k < 1:
            errors.append(SemanticError(path, "Repeat requires a positive :repeat count"))
    if kind is NodeKind.RETRY_UNTIL_SUCCESSFUL:
        k = node.attrs.get("num_attempts", node.attrs.get("num_retries"))
        if not isinstance(k, int) or k < 1:
            errors.append(SemanticError(
                path, "RetryUntilSuccessful requires a positive :num_attempts"))
    if kind is NodeKind.RECOVERY:
        k = node.attrs.get("num_retries")
        if not isinstance(k, int) or k < 0:
            errors.append(SemanticError(path, "Recovery requires a non-negative :num_retries"))
    if kind is NodeKind.RATE_CONTROLLER:
        hz = node.attrs.get("hz")
        if hz is None:
            hz = dict(node.attrs.get("args", [])).get("hz")
        if not isinstance(hz, (int, float)) or hz <= 0:
            errors.append(SemanticError(path, "RateController requires a positive rate"))
    if kind is NodeKind.SET_SV:
        sv = node.attrs.get("sv", node.attrs.get("SV"))
        if sv is None or sv not in ctx.sv_decls:
            errors.append(SemanticError(path, f"SetSV references undeclared SV {sv!r}"))
        else:
            ctx.assigned_svs.add(sv)
            ctx.referenced_svs.add(sv)
    for _, value in node.attrs.get("args", []):
        if isinstance(value, ArgRef):
            decl = ctx.sv_decls.get(value.name)
            if decl is None:
                # not an SV: opaque payload passed through to providers
                warnings.append(f"{path}: '${value.name}' is not a declared SV; "
                                "passed through as-is")
            elif decl.is_enumerated:
                errors.append(SemanticError(
                    path, f"'${value.name}' must reference a bounded integer SV"))
            else:
                ctx.referenced_svs.add(value.name)


# ---------------------------------------------------------------------------
# Canonical pretty printer

def _emit_expr(expr):
    if isinstance(expr, Literal):
        return str(expr.value)
    if isinstance(expr, SvRef):
        return expr.name
    if isinstance(expr, StatusRef):
        return f"{expr.node_name}.rstatus"
    if isinstance(expr, ArgRef):
        return f"${expr.name}"
    if isinstance(expr, Eq):
        return f"(= {_emit_expr(expr.left)} {_emit_expr(expr.right)})"
    if isinstance(expr, Not):
        return f"(~ {_emit_expr(expr.operand)})"
    if isinstance(expr, Assign):
        return f"(:= {expr.sv_name} {_emit_expr(expr.value)})"
    if isinstance(expr, Add):
        return f"(+ {_emit_expr(expr.left)} {_emit_expr(expr.right)})"
    if isinstance(expr, Mul):
        return f"(* {_emit_expr(expr.left)} {_emit_expr(expr.right)})"
    raise TypeError(f"cannot emit {expr!r}")


def _emit_attr_value(key, value):
    if value is True:
        return None  # bare flag
    if key == "args":
        parts = []
        for name, v in value:
            parts.append(name)
            parts.append(_emit_expr(v) if isinstance(v, Expr) else str(v))
        return "(" + " ".join(parts) + ")"
    if key == "states":
        return "(" + " ".join(value) + ")"
    if key == "transitions":
        if value == ALL_PAIRS:
            return ":all"
        return "(" + " ".join(f"({a} {b})" for a, b in value) + ")"
    return str(value)


def _emit_attrs(attrs):
    parts = []
    for key, value in attrs.items():
        rendered = _emit_attr_value(key, value)
        parts.append(f":{key}" if rendered is None else f":{key} {rendered}")
    return parts


def _emit_node(node: NodeAst, indent):
    pad = " " * indent
    head = " ".join([node.kind.value] + _emit_attrs(node.attrs))
    if node.kind is NodeKind.EVAL:
        return f"{pad}({head} {_emit_expr(node.expr)})"
    if not node.children:
        return f"{pad}({head})"
    lines = [f"{pad}({head}"]
    lines.extend(_emit_node(child, indent + 2) for child in node.children)
    lines[-1] += ")"
    return "\n".join(lines)


def _emit_defsv(decl: SvDecl):
    lines = [f"(defsv {decl.name}"]
    if decl.is_enumerated:
        lines.append(f"  :states ({' '.join(decl.states)})")
        lines.append(f"  :init {decl.init}")
        lines.append("  :transitions " + _emit_attr_value("transitions", decl.transitions))
    else:
        lines.append(f"  :init {decl.init}")
        lines.append(f"  :min {decl.min}")
        lines.append(f"  :max {decl.max}")
    lines[-1] += ")"
    return "\n".join(lines)


def emit_canonical(vspec: ValidatedSpec) -> str:
    """Deterministic pretty-print; re-parsing yields a structurally equal AST."""
    chunks = ["("]
    for decl in vspec.spec.svs:
        chunks.append(_emit_defsv(decl))
        chunks.append("")
    for tree in vspec.spec.trees:
        chunks.append(_emit_node(tree, 0))
        chunks.append("")
    while chunks and chunks[-1] == "":
        chunks.pop()
    return "\n".join(chunks) + "\n)\n"


# ---------------------------------------------------------------------------
# Structural comparison (ignores source positions and validator annotations)

def ast_key(spec: BtSpec):
    def expr_key(expr):
        if expr is None:
            return None
        if isinstance(expr, Literal):
            return ("lit", expr.value)
        if isinstance(expr, (SvRef, ArgRef)):
            return (type(expr).__name__, expr.name)
        if isinstance(expr, StatusRef):
            return ("status", expr.node_name)
        if isinstance(expr, Not):
            return ("~", expr_key(expr.operand))
        if isinstance(expr, Assign):
            return (":=", expr.sv_name, expr_key(expr.value))
        op = {Eq: "=", Add: "+", Mul: "*"}[type(expr)]
        return (op, expr_key(expr.left), expr_key(expr.right))

    def attr_key(attrs):
        out = []
        for key, value in attrs.items():
            if key == "args":
                value = tuple((n, expr_key(v) if isinstance(v, Expr) else v)
                              for n, v in value)
            elif isinstance(value, list):
                value = tuple(tuple(v) if isinstance(v, tuple) else v for v in value)
            out.append((key, value))
        return tuple(out)

    def node_key(node):
        return (node.kind.value, attr_key(node.attrs), expr_key(node.expr),
                tuple(node_key(c) for c in node.children))

    def sv_key(decl):
        transitions = decl.transitions
        if isinstance(transitions, list):
            transitions = tuple(transitions)
        return (decl.name, tuple(decl.states) if decl.states else None,
                transitions, decl.min, decl.max, decl.init)

    return (tuple(sv_key(d) for d in spec.svs),
            tuple(node_key(t) for t in spec.trees))
