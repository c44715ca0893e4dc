"""Execution shim: newline-delimited JSON requests on stdin, one response
line per request on the original stdout.

Ops: ping, load, call, trace, shutdown. User code never sees the protocol
streams; its stdout goes to /dev/null and stdin reads EOF.
"""
import ast
import inspect
import json
import math
import os
import signal
import sys


PROTO_IN = os.fdopen(os.dup(0), "r", encoding="utf-8")
PROTO_OUT = os.fdopen(os.dup(1), "w", encoding="utf-8")
_null = os.open(os.devnull, os.O_RDWR)
os.dup2(_null, 0)
os.dup2(_null, 1)
sys.stdin = open(os.devnull, "r")
sys.stdout = open(os.devnull, "w")

I64_MIN, I64_MAX = -(2 ** 63), 2 ** 63 - 1


def _limit_memory():
    mb = os.environ.get("BRIDGE_MEMORY_MB")
    if not mb:
        return
    try:
        import resource

        cap = int(mb) * 1024 * 1024
        resource.setrlimit(resource.RLIMIT_AS, (cap, cap))
    except (ValueError, OSError, ImportError):
        pass


def _disable_network():
    try:
        import socket
    except ImportError:
        return

    def refuse(*_a, **_k):
        raise OSError("network access is disabled in the execution shim")

    class NoSocket:
        def __init__(self, *a, **k):
            refuse()

    socket.socket = NoSocket
    socket.create_connection = refuse
    socket.getaddrinfo = refuse


class CallTimeout(BaseException):
    pass


class Unserializable(Exception):
    pass


def _on_alarm(_sig, _frame):
    raise CallTimeout()


signal.signal(signal.SIGALRM, _on_alarm)


def to_json(v):
    if v is None or isinstance(v, (bool, str)):
        return v
    if isinstance(v, int):
        if I64_MIN <= v <= I64_MAX:
            return v
        raise Unserializable("integer out of 64-bit range")
    if isinstance(v, float):
        if math.isfinite(v):
            return v
        raise Unserializable("non-finite float")
    if isinstance(v, (list, tuple)):
        return [to_json(x) for x in v]
    if isinstance(v, dict):
        out = {}
        for k, x in v.items():
            if not isinstance(k, str):
                raise Unserializable("non-string map key")
            out[k] = to_json(x)
        return out
    tolist = getattr(v, "tolist", None)
    if callable(tolist) and type(v).__module__.split(".")[0] in ("numpy", "pandas"):
        return to_json(tolist())
    raise Unserializable("cannot serialize %s" % type(v).__name__)


class Coverage:
    """Records branch arms hit by the instrumented function."""

    def __init__(self):
        self.total = set()
        self.covered = set()

    def arm(self, bid, k):
        self.covered.add("%s:%d" % (bid, k))

    def hit(self, bid, k):
        self.arm(bid, k)
        return None

    def boolop(self, bid, is_and, value):
        # arm 0: evaluation continues to the next operand; arm 1: short-circuit
        cont = bool(value) if is_and else not bool(value)
        self.arm(bid, 0 if cont else 1)
        return value

    def cond(self, bid, value):
        self.arm(bid, 0 if value else 1)
        return value


def _bid(node):
    return "%d:%d" % (node.lineno, node.col_offset)


def _probe_stmt(bid, k, node):
    call = ast.Call(
        func=ast.Name(id="__bf_hit", ctx=ast.Load()),
        args=[ast.Constant(bid), ast.Constant(k)],
        keywords=[],
    )
    return ast.copy_location(ast.Expr(value=call), node)


def _is_const_true(test):
    return isinstance(test, ast.Constant) and bool(test.value)


class Instrument(ast.NodeTransformer):
    def __init__(self):
        self.total = set()

    def _arms(self, bid, n):
        for k in range(n):
            self.total.add("%s:%d" % (bid, k))

    def visit_If(self, node):
        self.generic_visit(node)
        bid = _bid(node)
        self._arms(bid, 2)
        node.body.insert(0, _probe_stmt(bid, 0, node))
        node.orelse.insert(0, _probe_stmt(bid, 1, node))
        return node

    def _loop(self, node, exhaustible):
        self.generic_visit(node)
        bid = _bid(node)
        node.body.insert(0, _probe_stmt(bid, 0, node))
        if exhaustible:
            self._arms(bid, 2)
            node.orelse.insert(0, _probe_stmt(bid, 1, node))
        else:
            self._arms(bid, 1)
        return node

    def visit_While(self, node):
        return self._loop(node, not _is_const_true(node.test))

    def visit_For(self, node):
        return self._loop(node, True)

    def visit_AsyncFor(self, node):
        return self._loop(node, True)

    def visit_ExceptHandler(self, node):
        self.generic_visit(node)
        bid = _bid(node)
        self._arms(bid, 1)
        node.body.insert(0, _probe_stmt(bid, 0, node))
        return node

    def visit_IfExp(self, node):
        self.generic_visit(node)
        bid = _bid(node)
        self._arms(bid, 2)

        def guard(k, expr):
            probe = ast.Call(
                func=ast.Name(id="__bf_hit", ctx=ast.Load()),
                args=[ast.Constant(bid), ast.Constant(k)],
                keywords=[],
            )
            return ast.BoolOp(op=ast.Or(), values=[probe, expr])

        node.body = guard(0, node.body)
        node.orelse = guard(1, node.orelse)
        return node

    def visit_BoolOp(self, node):
        self.generic_visit(node)
        is_and = isinstance(node.op, ast.And)
        values = []
        for i, v in enumerate(node.values):
            if i == len(node.values) - 1:
                values.append(v)
                continue
            bid = "%d:%d.%d" % (node.lineno, node.col_offset, i)
            self._arms(bid, 2)
            values.append(
                ast.copy_location(
                    ast.Call(
                        func=ast.Name(id="__bf_bo", ctx=ast.Load()),
                        args=[ast.Constant(bid), ast.Constant(is_and), v],
                        keywords=[],
                    ),
                    v,
                )
            )
        node.values = values
        return node

    def visit_comprehension(self, node):
        self.generic_visit(node)
        ifs = []
        for cond in node.ifs:
            bid = _bid(cond)
            self._arms(bid, 2)
            ifs.append(
                ast.copy_location(
                    ast.Call(
                        func=ast.Name(id="__bf_cond", ctx=ast.Load()),
                        args=[ast.Constant(bid), cond],
                        keywords=[],
                    ),
                    cond,
                )
            )
        node.ifs = ifs
        return node


class Module:
    def __init__(self, name, source, function):
        self.name = name
        self.plain = {"__name__": name}
        code = compile(source, "<%s>" % name, "exec")
        exec(code, self.plain)
        self.coverage = None
        self.traced = None
        if function:
            self._instrument(source, function)

    def _instrument(self, source, function):
        tree = ast.parse(source)
        inst = Instrument()
        for i, node in enumerate(tree.body):
            if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)) and node.name == function:
                tree.body[i] = inst.visit(node)
        ast.fix_missing_locations(tree)
        cov = Coverage()
        cov.total = inst.total
        ns = {
            "__name__": self.name,
            "__bf_hit": cov.hit,
            "__bf_bo": cov.boolop,
            "__bf_cond": cov.cond,
        }
        exec(compile(tree, "<%s:traced>" % self.name, "exec"), ns)
        self.coverage = cov
        self.traced = ns


MODULES = {}


def bind(fn, inputs):
    args, kwargs = [], {}
    try:
        params = inspect.signature(fn).parameters.values()
    except (TypeError, ValueError):
        return [], dict(inputs)
    for p in params:
        if p.name not in inputs:
            continue
        v = inputs[p.name]
        if p.kind == p.POSITIONAL_ONLY:
            args.append(v)
        elif p.kind == p.VAR_POSITIONAL:
            args.extend(v)
        elif p.kind == p.VAR_KEYWORD:
            kwargs.update(v)
        else:
            kwargs[p.name] = v
    return args, kwargs


def timed(seconds, thunk):
    if seconds and seconds > 0:
        signal.setitimer(signal.ITIMER_REAL, float(seconds))
    try:
        return thunk()
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)


def error(rid, kind, message):
    return {"id": rid, "status": "exception", "type": kind, "message": str(message)[:2000]}


def invoke(req, rid, traced):
    mod = MODULES.get(req.get("module"))
    if mod is None:
        return error(rid, "malformed-request", "module not loaded: %r" % req.get("module"))
    name = req.get("function")
    ns = mod.traced if traced else mod.plain
    if traced and ns is None:
        return error(rid, "malformed-request", "module was loaded without instrumentation")
    fn = ns.get(name)
    if not callable(fn):
        return {"id": rid, "status": "exception", "type": "NameError", "message": "no function %r" % name}
    inputs = req.get("inputs") or {}
    if not isinstance(inputs, dict):
        return error(rid, "malformed-request", "inputs must be an object")
    if traced:
        mod.coverage.covered = set()
    args, kwargs = bind(fn, inputs)
    try:
        value = timed(req.get("timeout"), lambda: fn(*args, **kwargs))
    except CallTimeout:
        return {"id": rid, "status": "timeout", "message": "call exceeded time limit"}
    except BaseException as e:  # noqa: B036 -- user code may raise anything
        return {"id": rid, "status": "exception", "type": type(e).__name__, "message": str(e)[:2000]}
    try:
        out = {"id": rid, "status": "ok", "value": to_json(value)}
    except Unserializable as e:
        out = error(rid, "unserializable-result", e)
    except RecursionError as e:
        out = error(rid, "unserializable-result", e)
    if traced:
        out["covered"] = sorted(mod.coverage.covered)
        out["total"] = sorted(mod.coverage.total)
    return out


def handle(req):
    rid = req.get("id")
    op = req.get("op")
    if op == "ping":
        return {"id": rid, "status": "ok", "value": "pong"}
    if op == "load":
        name, source = req.get("module"), req.get("source")
        if not isinstance(name, str) or not isinstance(source, str):
            return error(rid, "malformed-request", "load needs module and source")
        try:
            MODULES[name] = timed(req.get("timeout"), lambda: Module(name, source, req.get("function")))
        except CallTimeout:
            return {"id": rid, "status": "timeout", "message": "load exceeded time limit"}
        except BaseException as e:  # noqa: B036
            MODULES.pop(name, None)
            return {"id": rid, "status": "exception", "type": type(e).__name__, "message": str(e)[:2000]}
        return {"id": rid, "status": "ok", "value": None}
    if op == "call":
        return invoke(req, rid, False)
    if op == "trace":
        return invoke(req, rid, True)
    if op == "shutdown":
        return {"id": rid, "status": "ok", "value": None}
    return error(rid, "malformed-request", "unknown op %r" % op)


def main():
    _limit_memory()
    _disable_network()
    sys.setrecursionlimit(3000)
    for line in PROTO_IN:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            if not isinstance(req, dict):
                raise ValueError("request must be an object")
        except ValueError as e:
            resp = error(None, "malformed-request", e)
            req = {}
        else:
            try:
                resp = handle(req)
            except CallTimeout:
                resp = {"id": req.get("id"), "status": "timeout", "message": "time limit"}
            except BaseException as e:  # noqa: B036
                resp = error(req.get("id"), "internal", "%s: %s" % (type(e).__name__, e))
        try:
            text = json.dumps(resp, allow_nan=False)
        except (TypeError, ValueError) as e:
            text = json.dumps(error(req.get("id"), "unserializable-result", e))
        PROTO_OUT.write(text + "\n")
        PROTO_OUT.flush()
        if req.get("op") == "shutdown":
            return 0
    return 0


if __name__ == "__main__":
    sys.exit(main())
