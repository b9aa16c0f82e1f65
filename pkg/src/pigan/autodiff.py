"""Expression-graph automatic differentiation with arbitrary nesting.

A :class:`Graph` is an append-only record of operations. Building a node does
not compute anything; values are produced by :meth:`Graph.eval` from a mapping
of leaf values. Derivatives are themselves emitted as nodes of the same graph
(:meth:`Graph.grad` for reverse mode, :meth:`Graph.jvp` for forward mode), so
they can be differentiated again to any order.

Every node carries a numpy array and all arithmetic is elementwise with numpy
broadcasting, i.e. an ``(N, 1)`` leaf is N independent scalars evaluated
through the same expression. The non-elementwise operations (``matmul``,
``sum``, ``concat``, reshapes) are what make small dense networks cheap to
express. ``grad`` differentiates the *sum* of its output, which for row-wise
independent expressions gives per-row derivatives in a single pass.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Graph",
    "Node",
    "GraphError",
    "MissingLeafError",
    "NonFiniteError",
    "tanh",
    "exp",
    "log",
    "sin",
    "cos",
    "sqrt",
    "square",
    "sigmoid",
    "softplus",
    "matmul",
    "concat",
    "reshape",
    "total",
    "mean",
]


class GraphError(ValueError):
    """Malformed graph construction (unknown op, foreign node, bad operand)."""


class MissingLeafError(KeyError):
    pass


class NonFiniteError(FloatingPointError):
    """Raised as soon as any node evaluates to inf or nan."""

    def __init__(self, node_id: int, kind: str):
        self.node_id = node_id
        self.kind = kind
        super().__init__(f"non-finite value at node {node_id} ({kind})")


class Node:
    """Handle to one node of a :class:`Graph`. Supports arithmetic operators."""

    __slots__ = ("graph", "id")

    def __init__(self, graph: "Graph", id: int):
        self.graph = graph
        self.id = id

    @property
    def kind(self) -> str:
        return self.graph._kind[self.id]

    @property
    def is_leaf(self) -> bool:
        return self.graph._kind[self.id] == "leaf"

    def __repr__(self) -> str:
        return f"Node({self.id}, {self.kind})"

    def __hash__(self) -> int:
        return hash((id(self.graph), self.id))

    def __eq__(self, other) -> bool:  # identity semantics, not elementwise
        return isinstance(other, Node) and other.graph is self.graph and other.id == self.id

    def _lift(self, other) -> "Node":
        return self.graph._as_node(other)

    def __add__(self, other):
        return self.graph._emit("add", (self.id, self._lift(other).id))

    def __radd__(self, other):
        return self.graph._emit("add", (self._lift(other).id, self.id))

    def __sub__(self, other):
        return self.graph._emit("sub", (self.id, self._lift(other).id))

    def __rsub__(self, other):
        return self.graph._emit("sub", (self._lift(other).id, self.id))

    def __mul__(self, other):
        return self.graph._emit("mul", (self.id, self._lift(other).id))

    def __rmul__(self, other):
        return self.graph._emit("mul", (self._lift(other).id, self.id))

    def __truediv__(self, other):
        return self.graph._emit("div", (self.id, self._lift(other).id))

    def __rtruediv__(self, other):
        return self.graph._emit("div", (self._lift(other).id, self.id))

    def __neg__(self):
        return self.graph._emit("neg", (self.id,))

    def __matmul__(self, other):
        return self.graph._emit("matmul", (self.id, self._lift(other).id))

    @property
    def T(self) -> "Node":
        return self.graph._emit("transpose", (self.id,))


# --------------------------------------------------------------------------
# forward rules: (operand values, attr) -> value


def _sumto(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        lead + i for i, s in enumerate(shape) if s == 1 and g.shape[lead + i] != 1
    )
    out = g.sum(axis=axes, keepdims=True) if axes else g
    return out.reshape(shape)


def _bcast(g: np.ndarray, shape: tuple, axis) -> np.ndarray:
    if axis is not None and g.ndim < len(shape):
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def _concat_part(vals, attr):
    index, axis = attr
    g, parts = vals[0], vals[1:]
    start = sum(p.shape[axis] for p in parts[:index])
    stop = start + parts[index].shape[axis]
    sl = [slice(None)] * g.ndim
    sl[axis] = slice(start, stop)
    return g[tuple(sl)]


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


_FORWARD: dict[str, Callable] = {
    "add": lambda v, a: v[0] + v[1],
    "sub": lambda v, a: v[0] - v[1],
    "mul": lambda v, a: v[0] * v[1],
    "div": lambda v, a: v[0] / v[1],
    "neg": lambda v, a: -v[0],
    "matmul": lambda v, a: v[0] @ v[1],
    "tanh": lambda v, a: np.tanh(v[0]),
    "exp": lambda v, a: np.exp(v[0]),
    "log": lambda v, a: np.log(v[0]),
    "sin": lambda v, a: np.sin(v[0]),
    "cos": lambda v, a: np.cos(v[0]),
    "sqrt": lambda v, a: np.sqrt(v[0]),
    "square": lambda v, a: v[0] * v[0],
    "sigmoid": lambda v, a: _sigmoid(v[0]),
    "softplus": lambda v, a: np.logaddexp(0.0, v[0]),
    "transpose": lambda v, a: v[0].T,
    "sum": lambda v, a: np.sum(v[0], axis=a[0], keepdims=a[1]),
    "bcast": lambda v, a: _bcast(v[0], v[1].shape, a),
    "sumto": lambda v, a: _sumto(v[0], v[1].shape),
    "reshape": lambda v, a: v[0].reshape(a),
    "reshape_like": lambda v, a: v[0].reshape(v[1].shape),
    "concat": lambda v, a: np.concatenate(v, axis=a),
    "concat_part": _concat_part,
    "zeros_like": lambda v, a: np.zeros_like(v[0]),
    "ones_like": lambda v, a: np.ones_like(v[0]),
    "count_inv": lambda v, a: np.asarray(
        1.0 / (np.size(v[0]) if a is None else np.shape(v[0])[a]), dtype=v[0].dtype
    ),
}

# operands that only provide a shape; never differentiated
_SHAPE_ONLY = {"bcast": 1, "sumto": 1, "reshape_like": 1}
_CONSTANT_OPS = {"zeros_like", "ones_like", "count_inv", "const", "leaf"}


class Graph:
    """Append-only expression graph.

    Structurally identical non-leaf nodes are shared (hash-consing), so
    repeated derivative emission does not grow the graph with duplicates.

    ``check_finite``: ``True`` tests every node as it is computed; ``"outputs"``
    tests only the requested outputs and, if one is bad, locates the first
    non-finite node afterwards (cheaper, but an overflow that a saturating op
    such as tanh maps back to a finite value goes unnoticed); ``False`` skips
    the test. ``dtype`` is the working precision of leaves and constants.
    """

    def __init__(self, check_finite: bool | str = True, dtype=np.float64):
        self.check_finite = check_finite
        self.dtype = np.dtype(dtype)
        self._kind: list[str] = []
        self._args: list[tuple[int, ...]] = []
        self._attr: list = []
        self._names: dict[int, str] = {}
        self._consts: dict[int, np.ndarray] = {}
        self._memo: dict = {}
        self._plans: dict[tuple[int, ...], list[int]] = {}
        self.values: dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._kind)

    # ---------------------------------------------------------------- build
    def leaf(self, name: str | None = None) -> Node:
        i = self._append("leaf", (), None)
        if name is not None:
            self._names[i] = name
        return Node(self, i)

    def const(self, value) -> Node:
        arr = np.asarray(value, dtype=self.dtype)
        key = ("const", float(arr)) if arr.ndim == 0 else None
        if key is not None and key in self._memo:
            return Node(self, self._memo[key])
        i = self._append("const", (), None)
        self._consts[i] = arr
        if key is not None:
            self._memo[key] = i
        return Node(self, i)

    def _append(self, kind, args, attr) -> int:
        self._kind.append(kind)
        self._args.append(args)
        self._attr.append(attr)
        return len(self._kind) - 1

    def _as_node(self, x) -> Node:
        if isinstance(x, Node):
            if x.graph is not self:
                raise GraphError("node belongs to a different graph")
            return x
        return self.const(x)

    def _emit(self, kind: str, args: tuple[int, ...], attr=None) -> Node:
        if kind not in _FORWARD:
            raise GraphError(f"unknown op kind {kind!r}")
        n = len(self._kind)
        for a in args:
            if not 0 <= a < n:
                raise GraphError(f"operand id {a} out of range")
        key = (kind, args, attr)
        hit = self._memo.get(key)
        if hit is not None:
            return Node(self, hit)
        i = self._append(kind, args, attr)
        self._memo[key] = i
        return Node(self, i)

    def op(self, kind: str, *operands, attr=None) -> Node:
        """Generic builder: ``g.op("tanh", x)``."""
        ids = tuple(self._as_node(o).id for o in operands)
        return self._emit(kind, ids, attr)

    def node(self, id: int) -> Node:
        return Node(self, id)

    # ----------------------------------------------------------------- eval
    def _ancestors(self, roots: Iterable[int]) -> set[int]:
        seen: set[int] = set()
        stack = list(roots)
        while stack:
            i = stack.pop()
            if i in seen:
                continue
            seen.add(i)
            stack.extend(self._args[i])
        return seen

    def _plan(self, key: tuple[int, ...]) -> list[int]:
        plan = self._plans.get(key)
        if plan is None:
            plan = sorted(self._ancestors(key))
            self._plans[key] = plan
        return plan

    def eval(self, outputs, leaf_values: Mapping) -> np.ndarray | list[np.ndarray]:
        """Evaluate ``outputs`` (a node or a sequence of nodes).

        ``leaf_values`` maps leaf nodes (or their integer ids) to arrays.
        Raises :class:`MissingLeafError` for an unbound reachable leaf and
        :class:`NonFiniteError` naming the first node that is not finite.
        """
        single = isinstance(outputs, Node)
        outs = [outputs] if single else list(outputs)
        for o in outs:
            if o.graph is not self:
                raise GraphError("output belongs to a different graph")
        bound = {(k.id if isinstance(k, Node) else int(k)): v for k, v in leaf_values.items()}
        vals: dict[int, np.ndarray] = {}
        kinds, args, attrs = self._kind, self._args, self._attr
        every = self.check_finite is True
        with np.errstate(all="ignore"):
            for i in self._plan(tuple(o.id for o in outs)):
                kind = kinds[i]
                if kind == "leaf":
                    if i not in bound:
                        name = self._names.get(i, "")
                        raise MissingLeafError(f"no value bound for leaf {i} {name}".rstrip())
                    v = np.asarray(bound[i], dtype=self.dtype)
                elif kind == "const":
                    v = self._consts[i]
                else:
                    v = _FORWARD[kind]([vals[a] for a in args[i]], attrs[i])
                if every and not np.isfinite(v).all():
                    raise NonFiniteError(i, kind)
                vals[i] = v
        self.values = vals
        if self.check_finite == "outputs":
            if not all(np.isfinite(vals[o.id]).all() for o in outs):
                for i in self._plan(tuple(o.id for o in outs)):
                    if not np.isfinite(vals[i]).all():
                        raise NonFiniteError(i, kinds[i])
        res = [vals[o.id] for o in outs]
        return res[0] if single else res

    # ------------------------------------------------------------- reverse
    def grad(self, output: Node, wrt: Sequence[Node], seed: Node | None = None) -> list[Node]:
        """Emit nodes for the gradient of ``sum(output)`` w.r.t. each node in ``wrt``.

        Targets are usually leaves. An interior target is treated as an
        independent variable: the gradient flows into it and stops there, which
        is what ``grad(D(xhat), [xhat])`` needs when ``xhat`` is built from data.
        The returned nodes live in this graph and are differentiable again.
        ``seed`` overrides the output adjoint (default: ones shaped like output).
        """
        for w in wrt:
            if w.graph is not self:
                raise GraphError(f"grad target {w!r} is not a node of this graph")
        out = output.id
        wrt_ids = [w.id for w in wrt]
        reach = self._ancestors([out])
        dep = self._dependents(reach, set(wrt_ids))
        if seed is None:
            seed = self._emit("ones_like", (out,))
        if out not in dep:
            return [self._emit("zeros_like", (w,)) for w in wrt_ids]

        adj: dict[int, list[Node]] = {out: [seed]}
        result: dict[int, Node] = {}
        targets = set(wrt_ids)
        for i in sorted(reach & dep, reverse=True):
            parts = adj.pop(i, None)
            if parts is None:
                continue
            g = parts[0]
            for p in parts[1:]:
                g = g + p
            kind = self._kind[i]
            if i in targets or kind == "leaf":
                result[i] = g
                continue
            need = tuple(a in dep for a in self._args[i])
            for idx, contrib in _VJP[kind](self, i, g, need):
                adj.setdefault(self._args[i][idx], []).append(contrib)
        return [result.get(w, self._emit("zeros_like", (w,))) for w in wrt_ids]

    def _dependents(self, reach: set[int], seeds: set[int]) -> set[int]:
        dep = set(seeds)
        for i in sorted(reach):
            if i in dep:
                continue
            kind = self._kind[i]
            if kind in _CONSTANT_OPS:
                continue
            args = self._args[i]
            if kind in _SHAPE_ONLY:
                args = args[:1]
            elif kind == "concat_part":
                args = args[:1]
            if any(a in dep for a in args):
                dep.add(i)
        return dep

    # ------------------------------------------------------------- forward
    def jvp(
        self,
        outputs: Sequence[Node],
        wrt: Node,
        tangent: Node | None = None,
        cache: dict[int, int | None] | None = None,
    ) -> list[Node]:
        """Emit forward-mode directional derivatives of ``outputs`` along leaf ``wrt``.

        ``cache`` maps node ids to already-emitted tangent ids (``None`` = zero).
        Passing the same dict to a second call with the same ``wrt`` reuses the
        first-order tangents, which is how second derivatives are taken cheaply:
        ``d1 = jvp([y], x, cache=c); d2 = jvp(d1, x, cache=c)``.
        """
        if wrt.graph is not self or not wrt.is_leaf:
            raise GraphError("jvp target must be a leaf of this graph")
        if cache is None:
            cache = {}
        if wrt.id not in cache:
            t = tangent if tangent is not None else self._emit("ones_like", (wrt.id,))
            cache[wrt.id] = t.id
        reach = self._ancestors([o.id for o in outputs])
        for i in sorted(reach):
            if i in cache:
                continue
            kind = self._kind[i]
            if kind in _CONSTANT_OPS:
                cache[i] = None
                continue
            targs = [cache[a] for a in self._args[i]]
            if kind in _SHAPE_ONLY or kind == "concat_part":
                live = targs[0] is not None
            else:
                live = any(t is not None for t in targs)
            if not live:
                cache[i] = None
                continue
            tn = _JVP[kind](self, i, [None if t is None else Node(self, t) for t in targs])
            cache[i] = tn.id
        res = []
        for o in outputs:
            t = cache[o.id]
            res.append(Node(self, t) if t is not None else self._emit("zeros_like", (o.id,)))
        return res


# --------------------------------------------------------------------------
# node-level helpers


def _g(*nodes) -> Graph:
    for n in nodes:
        if isinstance(n, Node):
            return n.graph
    raise GraphError("at least one operand must be a Node")


def tanh(x: Node) -> Node:
    return x.graph._emit("tanh", (x.id,))


def exp(x: Node) -> Node:
    return x.graph._emit("exp", (x.id,))


def log(x: Node) -> Node:
    return x.graph._emit("log", (x.id,))


def sin(x: Node) -> Node:
    return x.graph._emit("sin", (x.id,))


def cos(x: Node) -> Node:
    return x.graph._emit("cos", (x.id,))


def sqrt(x: Node) -> Node:
    return x.graph._emit("sqrt", (x.id,))


def square(x: Node) -> Node:
    return x.graph._emit("square", (x.id,))


def sigmoid(x: Node) -> Node:
    return x.graph._emit("sigmoid", (x.id,))


def softplus(x: Node) -> Node:
    """log(1 + e^x), evaluated without overflow."""
    return x.graph._emit("softplus", (x.id,))


def matmul(a: Node, b: Node) -> Node:
    g = _g(a, b)
    return g._emit("matmul", (g._as_node(a).id, g._as_node(b).id))


def concat(nodes: Sequence[Node], axis: int = -1) -> Node:
    if len(nodes) == 1:
        return nodes[0]
    g = _g(*nodes)
    return g._emit("concat", tuple(n.id for n in nodes), axis)


def reshape(x: Node, shape: tuple[int, ...]) -> Node:
    return x.graph._emit("reshape", (x.id,), tuple(shape))


def total(x: Node, axis: int | None = None, keepdims: bool = False) -> Node:
    return x.graph._emit("sum", (x.id,), (axis, keepdims))


def mean(x: Node, axis: int | None = None) -> Node:
    g = x.graph
    return total(x, axis) * g._emit("count_inv", (x.id,), axis)


# --------------------------------------------------------------------------
# reverse rules: (graph, node id, adjoint, need mask) -> [(operand index, adjoint)]


def _vjp_rules() -> dict[str, Callable]:
    def N(gr, i):
        return Node(gr, i)

    def sumto(gr, g, ref_id):
        return gr._emit("sumto", (g.id, ref_id))

    def add(gr, i, g, need):
        a, b = gr._args[i]
        out = []
        if need[0]:
            out.append((0, sumto(gr, g, a)))
        if need[1]:
            out.append((1, sumto(gr, g, b)))
        return out

    def sub(gr, i, g, need):
        a, b = gr._args[i]
        out = []
        if need[0]:
            out.append((0, sumto(gr, g, a)))
        if need[1]:
            out.append((1, sumto(gr, -g, b)))
        return out

    def mul(gr, i, g, need):
        a, b = gr._args[i]
        out = []
        if need[0]:
            out.append((0, sumto(gr, g * N(gr, b), a)))
        if need[1]:
            out.append((1, sumto(gr, g * N(gr, a), b)))
        return out

    def div(gr, i, g, need):
        a, b = gr._args[i]
        out = []
        if need[0]:
            out.append((0, sumto(gr, g / N(gr, b), a)))
        if need[1]:
            out.append((1, sumto(gr, -(g * N(gr, i)) / N(gr, b), b)))
        return out

    def mm(gr, i, g, need):
        a, b = gr._args[i]
        out = []
        if need[0]:
            out.append((0, g @ N(gr, b).T))
        if need[1]:
            out.append((1, N(gr, a).T @ g))
        return out

    def unary(fn):
        def rule(gr, i, g, need):
            return [(0, fn(gr, i, N(gr, gr._args[i][0]), g))]

        return rule

    def concat_rule(gr, i, g, need):
        args = gr._args[i]
        axis = gr._attr[i]
        return [
            (k, gr._emit("concat_part", (g.id,) + args, (k, axis)))
            for k in range(len(args))
            if need[k]
        ]

    def concat_part_rule(gr, i, g, need):
        args = gr._args[i]
        index, axis = gr._attr[i]
        parts = args[1:]
        pieces = [
            g.id if k == index else gr._emit("zeros_like", (p,)).id for k, p in enumerate(parts)
        ]
        return [(0, gr._emit("concat", tuple(pieces), axis))]

    def sum_rule(gr, i, g, need):
        axis, keepdims = gr._attr[i]
        a = gr._args[i][0]
        return [(0, gr._emit("bcast", (g.id, a), None if keepdims else axis))]

    def bcast_rule(gr, i, g, need):
        x = gr._args[i][0]
        axis = gr._attr[i]
        if axis is not None:
            return [(0, total(g, axis))]
        return [(0, gr._emit("sumto", (g.id, x)))]

    def sumto_rule(gr, i, g, need):
        x = gr._args[i][0]
        return [(0, gr._emit("bcast", (g.id, x), None))]

    def reshape_rule(gr, i, g, need):
        x = gr._args[i][0]
        return [(0, gr._emit("reshape_like", (g.id, x)))]

    return {
        "add": add,
        "sub": sub,
        "mul": mul,
        "div": div,
        "matmul": mm,
        "neg": unary(lambda gr, i, a, g: -g),
        "tanh": unary(lambda gr, i, a, g: g * (1.0 - square(N(gr, i)))),
        "exp": unary(lambda gr, i, a, g: g * N(gr, i)),
        "log": unary(lambda gr, i, a, g: g / a),
        "sin": unary(lambda gr, i, a, g: g * cos(a)),
        "cos": unary(lambda gr, i, a, g: -(g * sin(a))),
        "sqrt": unary(lambda gr, i, a, g: (g * 0.5) / N(gr, i)),
        "square": unary(lambda gr, i, a, g: g * (a * 2.0)),
        "sigmoid": unary(lambda gr, i, a, g: g * (N(gr, i) * (1.0 - N(gr, i)))),
        "softplus": unary(lambda gr, i, a, g: g * sigmoid(a)),
        "transpose": unary(lambda gr, i, a, g: g.T),
        "sum": sum_rule,
        "bcast": bcast_rule,
        "sumto": sumto_rule,
        "reshape": reshape_rule,
        "reshape_like": reshape_rule,
        "concat": concat_rule,
        "concat_part": concat_part_rule,
    }


_VJP = _vjp_rules()


# --------------------------------------------------------------------------
# forward rules: (graph, node id, operand tangents or None) -> tangent node


def _jvp_rules() -> dict[str, Callable]:
    def N(gr, i):
        return Node(gr, i)

    def bc(gr, t, i):
        # keep tangents at the output's shape so later reductions stay correct
        return gr._emit("bcast", (t.id, i), None)

    def add(gr, i, t):
        ta, tb = t
        if ta is None:
            return bc(gr, tb, i)
        if tb is None:
            return bc(gr, ta, i)
        return bc(gr, ta + tb, i)

    def sub(gr, i, t):
        ta, tb = t
        if ta is None:
            return bc(gr, -tb, i)
        if tb is None:
            return bc(gr, ta, i)
        return bc(gr, ta - tb, i)

    def mul(gr, i, t):
        a, b = (N(gr, k) for k in gr._args[i])
        ta, tb = t
        terms = []
        if ta is not None:
            terms.append(ta * b)
        if tb is not None:
            terms.append(a * tb)
        r = terms[0] if len(terms) == 1 else terms[0] + terms[1]
        return bc(gr, r, i)

    def div(gr, i, t):
        a, b = (N(gr, k) for k in gr._args[i])
        ta, tb = t
        if tb is None:
            return bc(gr, ta / b, i)
        num = -(N(gr, i) * tb) if ta is None else ta - N(gr, i) * tb
        return bc(gr, num / b, i)

    def mm(gr, i, t):
        a, b = (N(gr, k) for k in gr._args[i])
        ta, tb = t
        terms = []
        if ta is not None:
            terms.append(ta @ b)
        if tb is not None:
            terms.append(a @ tb)
        return terms[0] if len(terms) == 1 else terms[0] + terms[1]

    def unary(fn):
        def rule(gr, i, t):
            return fn(gr, i, N(gr, gr._args[i][0]), t[0])

        return rule

    def concat_rule(gr, i, t):
        args = gr._args[i]
        pieces = [
            gr._emit("zeros_like", (a,)).id if tk is None else tk.id for a, tk in zip(args, t)
        ]
        return gr._emit("concat", tuple(pieces), gr._attr[i])

    def with_ref(kind):
        def rule(gr, i, t):
            return gr._emit(kind, (t[0].id,) + gr._args[i][1:], gr._attr[i])

        return rule

    return {
        "add": add,
        "sub": sub,
        "mul": mul,
        "div": div,
        "matmul": mm,
        "neg": unary(lambda gr, i, a, t: -t),
        "tanh": unary(lambda gr, i, a, t: t * (1.0 - square(N(gr, i)))),
        "exp": unary(lambda gr, i, a, t: t * N(gr, i)),
        "log": unary(lambda gr, i, a, t: t / a),
        "sin": unary(lambda gr, i, a, t: t * cos(a)),
        "cos": unary(lambda gr, i, a, t: -(t * sin(a))),
        "sqrt": unary(lambda gr, i, a, t: (t * 0.5) / N(gr, i)),
        "square": unary(lambda gr, i, a, t: t * (a * 2.0)),
        "sigmoid": unary(lambda gr, i, a, t: t * (N(gr, i) * (1.0 - N(gr, i)))),
        "softplus": unary(lambda gr, i, a, t: t * sigmoid(a)),
        "transpose": unary(lambda gr, i, a, t: t.T),
        "sum": with_ref("sum"),
        "bcast": with_ref("bcast"),
        "sumto": with_ref("sumto"),
        "reshape": with_ref("reshape"),
        "reshape_like": with_ref("reshape_like"),
        "concat": concat_rule,
        "concat_part": with_ref("concat_part"),
    }


_JVP = _jvp_rules()
