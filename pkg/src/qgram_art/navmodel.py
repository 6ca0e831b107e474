"""Guarded navigation models: pages as nodes, page methods as edges.

A model is loaded from a JSON document (``"schema": 1``)::

    {
      "schema": 1,
      "name": "petclinic-like",
      "nodes": ["Index", "Find", ...],
      "home": "Index",
      "state": {"variables": {"logged_in": false},
                "collections": {"owners": []}},
      "edges": [
        {"id": "find", "source": "Find", "dest": "OwnerInfo", "method": "find",
         "params": [{"name": "id", "domain": {"ref_collection": "owners",
                                               "fallback": [0, 9]}}],
         "guard": ["in", ["arg", "id"], ["coll", "owners"]],
         "effects": [["set", "last_owner", ["arg", "id"]]]}
      ]
    }

Parameter domains are ``{"int_range": [lo, hi]}``, ``{"string_pool": [...]}``
or ``{"ref_collection": name, "fallback": [lo, hi]}``.

Guards are prefix expressions.  Operators: ``and``, ``or``, ``not``, ``eq``,
``ne``, ``lt``, ``le``, ``gt``, ``ge``, ``in``, ``nonempty``, ``size``,
``true``, ``false``.  Operands: ``["var", name]``, ``["arg", name]``,
``["coll", name]`` or a JSON literal.

Effects: ``["set", var, expr]``, ``["inc", var]``, ``["insert", coll]``
(appends the collection's next auto-increment id, starting at 0),
``["insert_value", coll, expr]``, ``["remove", coll, expr]`` and
``["clear", coll]``.
"""

from __future__ import annotations

import copy
import json
import random
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .qgram_core import Action, TestCase
from .selectors import CandidateGenerator, ExecutionOutcome

__all__ = [
    "SCHEMA_VERSION",
    "ModelError",
    "ParamSpec",
    "MethodEdge",
    "NavigationModel",
    "AppState",
    "load_model",
    "load_model_file",
    "bundled_models",
    "load_bundled",
    "evaluate_guard",
    "execute_test",
    "ModelExecutor",
    "PathGenerator",
    "generate_candidate",
    "random_walk",
    "shortest_path",
]

SCHEMA_VERSION = 1
MAX_WALK_LEN = 40
DEFAULT_FALLBACK = (0, 9)


class ModelError(ValueError):
    """Invalid model document.  ``where`` points at the offending element."""

    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str  # int_range | string_pool | ref_collection
    values: tuple = ()  # (lo, hi) for int_range, pool for string_pool
    collection: str | None = None
    fallback: tuple = DEFAULT_FALLBACK

    def draw(self, rng: random.Random, state: "AppState | None" = None):
        if self.kind == "int_range":
            return rng.randint(*self.values)
        if self.kind == "string_pool":
            return rng.choice(self.values)
        pool = state.collections.get(self.collection) if state is not None else None
        if pool:
            return rng.choice(list(pool))
        return rng.randint(*self.fallback)


@dataclass(frozen=True)
class MethodEdge:
    id: str
    source: str
    dest: str
    method: str
    params: tuple = ()
    guard: Any = None
    effects: tuple = ()


@dataclass
class AppState:
    variables: dict = field(default_factory=dict)
    collections: dict = field(default_factory=dict)
    next_ids: dict = field(default_factory=dict)

    def snapshot(self) -> "AppState":
        return copy.deepcopy(self)


@dataclass
class NavigationModel:
    name: str
    nodes: tuple
    home: str
    edges: tuple
    initial_state: AppState
    _out: dict = field(default_factory=dict, repr=False)
    _by_id: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._paths: dict = {}
        self._out = {n: {} for n in self.nodes}
        for e in self.edges:
            self._out[e.source][e.method] = e
        self._by_id = {e.id: e for e in self.edges}

    @property
    def targets(self) -> frozenset:
        return frozenset(self._by_id)

    def edge(self, edge_id: str) -> MethodEdge:
        return self._by_id[edge_id]

    def outgoing(self, node: str) -> list[MethodEdge]:
        return list(self._out[node].values())

    def find_edge(self, node: str, method: str) -> MethodEdge | None:
        return self._out[node].get(method)

    def fresh_state(self) -> AppState:
        return self.initial_state.snapshot()


# ---------------------------------------------------------------------------
# loading and validation
# ---------------------------------------------------------------------------

_BOOL_OPS = {"and", "or"}
_CMP_OPS = {"eq", "ne", "lt", "le", "gt", "ge", "in"}
_EFFECTS = {"set": 2, "inc": 1, "insert": 1, "insert_value": 2, "remove": 2, "clear": 1}


def _check_expr(expr, variables, collections, params, where):
    if not isinstance(expr, list):
        return  # literal
    if not expr:
        raise ModelError("empty expression", where)
    op, *args = expr
    if op == "var":
        if len(args) != 1 or args[0] not in variables:
            raise ModelError(f"undeclared variable {args!r}", where)
    elif op == "arg":
        if len(args) != 1 or args[0] not in params:
            raise ModelError(f"unknown argument {args!r}", where)
    elif op == "coll":
        if len(args) != 1 or args[0] not in collections:
            raise ModelError(f"undeclared collection {args!r}", where)
    elif op in ("nonempty", "size"):
        if len(args) != 1 or args[0] not in collections:
            raise ModelError(f"undeclared collection {args!r}", where)
    elif op in ("true", "false"):
        if args:
            raise ModelError(f"{op} takes no operands", where)
    elif op == "not":
        if len(args) != 1:
            raise ModelError("not takes one operand", where)
        _check_expr(args[0], variables, collections, params, where)
    elif op in _BOOL_OPS:
        if not args:
            raise ModelError(f"{op} needs operands", where)
        for a in args:
            _check_expr(a, variables, collections, params, where)
    elif op in _CMP_OPS:
        if len(args) != 2:
            raise ModelError(f"{op} takes two operands", where)
        for a in args:
            _check_expr(a, variables, collections, params, where)
    else:
        raise ModelError(f"unknown operator {op!r}", where)


def _parse_param(doc, collections, where) -> ParamSpec:
    if not isinstance(doc, dict) or "name" not in doc or "domain" not in doc:
        raise ModelError("parameter needs 'name' and 'domain'", where)
    dom = doc["domain"]
    name = doc["name"]
    if "int_range" in dom:
        lo, hi = dom["int_range"]
        if lo > hi:
            raise ModelError("empty int_range", where)
        return ParamSpec(name, "int_range", (int(lo), int(hi)))
    if "string_pool" in dom:
        pool = tuple(dom["string_pool"])
        if not pool:
            raise ModelError("empty string_pool", where)
        return ParamSpec(name, "string_pool", pool)
    if "ref_collection" in dom:
        coll = dom["ref_collection"]
        if coll not in collections:
            raise ModelError(f"undeclared collection {coll!r}", where)
        fallback = tuple(dom.get("fallback", DEFAULT_FALLBACK))
        return ParamSpec(name, "ref_collection", collection=coll, fallback=fallback)
    raise ModelError(f"unknown domain {dom!r}", where)


def load_model(document: dict | str) -> NavigationModel:
    """Validate a model document (dict or JSON text) and build the model."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    if not isinstance(document, dict):
        raise ModelError("model document must be a JSON object")
    if document.get("schema") != SCHEMA_VERSION:
        raise ModelError(f"unsupported schema {document.get('schema')!r}", "schema")
    for key in ("nodes", "home", "edges"):
        if key not in document:
            raise ModelError("missing key", key)

    nodes = tuple(document["nodes"])
    if len(set(nodes)) != len(nodes):
        raise ModelError("duplicate node", "nodes")
    home = document["home"]
    if home not in nodes:
        raise ModelError(f"home {home!r} is not a node", "home")

    state_doc = document.get("state", {})
    variables = dict(state_doc.get("variables", {}))
    collections = {k: list(v) for k, v in state_doc.get("collections", {}).items()}
    next_ids = {k: (max((x for x in v if isinstance(x, int)), default=-1) + 1)
                for k, v in collections.items()}

    edges_doc = document["edges"]
    if not edges_doc:
        raise ModelError("model has no edges, hence no coverage targets", "edges")
    edges = []
    seen_ids = set()
    seen_methods = set()
    for i, e in enumerate(edges_doc):
        where = f"edges[{i}]"
        for key in ("id", "source", "dest", "method"):
            if key not in e:
                raise ModelError(f"missing {key!r}", where)
        if e["id"] in seen_ids:
            raise ModelError(f"duplicate edge id {e['id']!r}", where)
        seen_ids.add(e["id"])
        for end in ("source", "dest"):
            if e[end] not in nodes:
                raise ModelError(f"{end} {e[end]!r} is not a declared node", where)
        if (e["source"], e["method"]) in seen_methods:
            raise ModelError(f"method {e['method']!r} repeated on node {e['source']!r}", where)
        seen_methods.add((e["source"], e["method"]))
        params = tuple(_parse_param(p, collections, f"{where}.params[{j}]")
                       for j, p in enumerate(e.get("params", [])))
        names = {p.name for p in params}
        guard = e.get("guard")
        if guard is not None:
            _check_expr(guard, variables, collections, names, f"{where}.guard")
        effects = tuple(tuple(x) for x in e.get("effects", []))
        for j, eff in enumerate(effects):
            ew = f"{where}.effects[{j}]"
            if not eff or eff[0] not in _EFFECTS or len(eff) - 1 != _EFFECTS[eff[0]]:
                raise ModelError(f"bad effect {list(eff)!r}", ew)
            op, target = eff[0], eff[1]
            pool = variables if op in ("set", "inc") else collections
            if target not in pool:
                raise ModelError(f"undeclared {'variable' if pool is variables else 'collection'} {target!r}", ew)
            if len(eff) == 3:
                _check_expr(eff[2], variables, collections, names, ew)
        edges.append(MethodEdge(e["id"], e["source"], e["dest"], e["method"], params, guard, effects))

    return NavigationModel(
        name=document.get("name", "model"),
        nodes=nodes,
        home=home,
        edges=tuple(edges),
        initial_state=AppState(variables, collections, next_ids),
    )


def load_model_file(path) -> NavigationModel:
    return load_model(Path(path).read_text())


def bundled_models() -> list[str]:
    """Names of the models shipped with the package."""
    root = resources.files("qgram_art") / "models"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_bundled(name: str) -> NavigationModel:
    path = resources.files("qgram_art") / "models" / f"{name}.json"
    return load_model(path.read_text())


# ---------------------------------------------------------------------------
# guard evaluation and execution
# ---------------------------------------------------------------------------

def _value(expr, state: AppState, args: dict):
    if not isinstance(expr, list):
        return expr
    op = expr[0]
    if op == "var":
        return state.variables[expr[1]]
    if op == "arg":
        return args.get(expr[1])
    if op == "coll":
        return state.collections[expr[1]]
    if op == "size":
        return len(state.collections[expr[1]])
    return evaluate_guard(expr, state, args)


def evaluate_guard(expr, state: AppState, args: dict | None = None) -> bool:
    """Truth value of a guard; never modifies ``state``."""
    if expr is None:
        return True
    args = args or {}
    if not isinstance(expr, list):
        return bool(expr)
    op, *rest = expr
    if op == "true":
        return True
    if op == "false":
        return False
    if op == "and":
        return all(evaluate_guard(a, state, args) for a in rest)
    if op == "or":
        return any(evaluate_guard(a, state, args) for a in rest)
    if op == "not":
        return not evaluate_guard(rest[0], state, args)
    if op == "nonempty":
        return bool(state.collections[rest[0]])
    if op in _CMP_OPS:
        a, b = (_value(x, state, args) for x in rest)
        try:
            if op == "eq":
                return a == b
            if op == "ne":
                return a != b
            if op == "in":
                return a in b
            if op == "lt":
                return a < b
            if op == "le":
                return a <= b
            if op == "gt":
                return a > b
            return a >= b
        except TypeError:
            return False
    return bool(_value(expr, state, args))


def _apply_effects(edge: MethodEdge, state: AppState, args: dict) -> None:
    for eff in edge.effects:
        op = eff[0]
        if op == "set":
            state.variables[eff[1]] = _value(eff[2], state, args)
        elif op == "inc":
            state.variables[eff[1]] = state.variables.get(eff[1], 0) + 1
        elif op == "insert":
            new_id = state.next_ids.get(eff[1], 0)
            state.next_ids[eff[1]] = new_id + 1
            state.collections[eff[1]].append(new_id)
        elif op == "insert_value":
            state.collections[eff[1]].append(_value(eff[2], state, args))
        elif op == "remove":
            value = _value(eff[2], state, args)
            if value in state.collections[eff[1]]:
                state.collections[eff[1]].remove(value)
        elif op == "clear":
            state.collections[eff[1]].clear()


def execute_test(model: NavigationModel, test: TestCase) -> ExecutionOutcome:
    """Replay ``test`` from the home page against a fresh application state.

    Execution stops at the first action whose method does not leave the
    current page or whose guard is false; the edges taken up to that point are
    reported as covered.
    """
    state = model.fresh_state()
    node = model.home
    covered = []
    for action in test.actions:
        edge = model.find_edge(node, action.method)
        if edge is None:
            break
        if len(action.args) != len(edge.params):
            break
        args = {p.name: v for p, v in zip(edge.params, action.args)}
        if not evaluate_guard(edge.guard, state, args):
            break
        _apply_effects(edge, state, args)
        covered.append(edge.id)
        node = edge.dest
    return ExecutionOutcome(failed=False, covered_targets=frozenset(covered))


class ModelExecutor:
    """Executor adapter; ``faulty_targets`` marks edges whose traversal counts as a failure."""

    def __init__(self, model: NavigationModel, faulty_targets=()):
        self.model = model
        self.faulty_targets = frozenset(faulty_targets)

    def execute(self, test: TestCase) -> ExecutionOutcome:
        outcome = execute_test(self.model, test)
        if self.faulty_targets and outcome.covered_targets & self.faulty_targets:
            return ExecutionOutcome(True, outcome.covered_targets)
        return outcome


# ---------------------------------------------------------------------------
# path and test generation
# ---------------------------------------------------------------------------

def random_walk(model: NavigationModel, length: int, rng: random.Random,
                start: str | None = None) -> list[MethodEdge]:
    """Walk of ``length`` edges picked uniformly among the outgoing ones (guards ignored)."""
    node = model.home if start is None else start
    path = []
    for _ in range(length):
        out = model.outgoing(node)
        if not out:
            break
        edge = rng.choice(out)
        path.append(edge)
        node = edge.dest
    return path


def shortest_path(model: NavigationModel, source: str, dest: str) -> list[MethodEdge] | None:
    """Fewest-edges path between two pages ignoring guards, or None if unreachable."""
    key = (source, dest)
    if key not in model._paths:
        model._paths[key] = _bfs(model, source, dest)
    path = model._paths[key]
    return None if path is None else list(path)


def _bfs(model: NavigationModel, source: str, dest: str) -> list[MethodEdge] | None:
    if source == dest:
        return []
    parent: dict = {source: None}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        for edge in model.outgoing(node):
            if edge.dest in parent:
                continue
            parent[edge.dest] = edge
            if edge.dest == dest:
                path = []
                cur = dest
                while parent[cur] is not None:
                    path.append(parent[cur])
                    cur = parent[cur].source
                return path[::-1]
            queue.append(edge.dest)
    return None


def _instantiate(model: NavigationModel, path: list[MethodEdge], rng: random.Random) -> TestCase:
    # parameter values come from the state expected along the path, assuming every step succeeds
    state = model.fresh_state()
    actions = []
    for edge in path:
        args = tuple(p.draw(rng, state) for p in edge.params)
        actions.append(Action(edge.method, args))
        _apply_effects(edge, state, {p.name: v for p, v in zip(edge.params, args)})
    return TestCase(actions=tuple(actions))


def generate_candidate(model: NavigationModel, rng: random.Random, uncovered=None,
                       max_walk_len: int = MAX_WALK_LEN) -> TestCase:
    """Random walk from the home page of length uniform in ``[1, max_walk_len]``,
    extended by the shortest path to a randomly chosen uncovered edge and then
    that edge.

    When no uncovered edge is reachable from the end of the walk, or none is
    left, the plain walk is returned.
    """
    walk = random_walk(model, rng.randint(1, max_walk_len), rng)
    end = walk[-1].dest if walk else model.home
    pending = sorted(uncovered) if uncovered else []
    while pending:
        target = model.edge(pending.pop(rng.randrange(len(pending))))
        bridge = shortest_path(model, end, target.source)
        if bridge is not None:
            walk = walk + bridge + [target]
            break
    return _instantiate(model, walk, rng)


class PathGenerator(CandidateGenerator):
    """Candidate generator over a navigation model that tracks covered edges."""

    def __init__(self, model: NavigationModel, max_walk_len: int = MAX_WALK_LEN):
        self.model = model
        self.max_walk_len = max_walk_len
        self.covered: set = set()

    def reset(self) -> None:
        self.covered = set()

    @property
    def uncovered(self) -> set:
        return set(self.model.targets) - self.covered

    def sample(self, count: int, rng: random.Random) -> list[TestCase]:
        uncovered = self.uncovered
        return [generate_candidate(self.model, rng, uncovered, self.max_walk_len)
                for _ in range(count)]

    def observe(self, test: TestCase, outcome: ExecutionOutcome) -> None:
        self.covered |= outcome.covered_targets
