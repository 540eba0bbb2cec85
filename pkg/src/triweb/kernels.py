"""Compiled evaluation of expressions as third-order jets.

An :class:`~triweb.expr.Expr` is flattened once into a stack program (a
"tape" of opcodes plus immediates), and the tape is executed on a stack
of raw 10-coefficient jet vectors.  Two interchangeable executors are
provided:

* numba ``@njit`` kernels, the default when numba imports; these carry
  the hot inner loops of leaf tracing, hexagon traversal, and grid
  reports;
* a vectorized pure-numpy fallback with identical semantics, selected by
  setting the environment variable ``TRIWEB_BACKEND=numpy`` (or
  ``numba`` to force the JIT path and fail loudly if it is missing).

Unary functions are composed through order 3 by Horner evaluation of
g(u0) + g'(u0) du + g''(u0)/2 du^2 + g'''(u0)/6 du^3 in jet arithmetic,
where du is the input jet with its value slot zeroed; division goes
through the same composition with g(t) = 1/t.  ``^`` with a literal
integer exponent uses repeated multiplication; any other exponent is
compiled as exp(b*ln(a)) and inherits the ln domain restriction.

All functions here are pure and all compiled programs immutable, so
concurrent use needs no coordination.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EvalDomainError
from .expr import BinOp, Call, Const, Expr, Neg, Var, parse, to_text
from .jets import JET_SIZE, PROD_A, PROD_B, PROD_N, PROD_OUT, PROD_W, Jet3

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


BACKEND_ENV = "TRIWEB_BACKEND"
BACKENDS = ("numba", "numpy")

# opcodes
OP_CONST = 0
OP_X = 1
OP_Y = 2
OP_ADD = 3
OP_SUB = 4
OP_MUL = 5
OP_DIV = 6
OP_NEG = 7
OP_POWI = 8
OP_EXP = 9
OP_LN = 10
OP_SIN = 11
OP_COS = 12
OP_SQRT = 13

# error codes shared by both executors
ERR_OK = 0
ERR_DIV_ZERO = 1
ERR_LN_DOMAIN = 2
ERR_SQRT_DOMAIN = 3
ERR_NOT_FINITE = 4

_ERR_TEXT = {
    ERR_DIV_ZERO: "division by zero",
    ERR_LN_DOMAIN: "ln of non-positive argument",
    ERR_SQRT_DOMAIN: "sqrt of non-positive argument",
    ERR_NOT_FINITE: "overflow to non-finite",
}

_MAX_INT_EXPONENT = 1000


def default_backend() -> str:
    """Backend chosen by the TRIWEB_BACKEND environment variable, falling
    back to numba when available."""
    v = os.environ.get(BACKEND_ENV, "").strip().lower()
    if v == "numba":
        if not HAVE_NUMBA:
            raise ConfigError("TRIWEB_BACKEND=numba but numba is not importable")
        return "numba"
    if v == "numpy":
        return "numpy"
    if v:
        raise ConfigError(f"unknown TRIWEB_BACKEND value {v!r}; use numba or numpy")
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Tape compilation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Program:
    """Flattened evaluation plan for one expression."""

    ops: np.ndarray  # int64 opcodes
    imm: np.ndarray  # int64 immediates (const index or integer exponent)
    consts: np.ndarray  # float64 literal pool
    frags: tuple  # per-op source fragment, for error attribution
    depth: int  # maximum stack height
    source: str  # printable form of the whole expression

    def __len__(self) -> int:
        return int(self.ops.shape[0])


def _int_exponent(e: Expr):
    """Literal integer exponent of a power node, or None."""
    neg = False
    if isinstance(e, Neg):
        e, neg = e.child, True
    if isinstance(e, Const) and float(e.value).is_integer():
        n = int(e.value)
        return -n if neg else n
    return None


def compile_expr(e: Expr | str, source: str | None = None) -> Program:
    """Flatten an expression (or expression text) into a Program."""
    if isinstance(e, str):
        source = e
        e = parse(e)

    ops: list[int] = []
    imm: list[int] = []
    consts: list[float] = []
    frags: list[str] = []

    def frag(node: Expr) -> str:
        lo, hi = node.span
        if source is not None and lo >= 0:
            return source[lo:hi]
        return to_text(node)

    def emit(op: int, node: Expr, immediate: int = 0):
        ops.append(op)
        imm.append(immediate)
        frags.append(frag(node))

    def rec(node: Expr):
        if isinstance(node, Const):
            consts.append(float(node.value))
            emit(OP_CONST, node, len(consts) - 1)
        elif isinstance(node, Var):
            emit(OP_X if node.axis == 0 else OP_Y, node)
        elif isinstance(node, Neg):
            rec(node.child)
            emit(OP_NEG, node)
        elif isinstance(node, Call):
            rec(node.arg)
            emit(
                {
                    "exp": OP_EXP,
                    "ln": OP_LN,
                    "sin": OP_SIN,
                    "cos": OP_COS,
                    "sqrt": OP_SQRT,
                }[node.fn],
                node,
            )
        elif isinstance(node, BinOp):
            if node.op == "^":
                n = _int_exponent(node.right)
                if n is not None:
                    if abs(n) > _MAX_INT_EXPONENT:
                        raise ValueError(
                            f"integer exponent {n} exceeds the supported "
                            f"magnitude {_MAX_INT_EXPONENT}"
                        )
                    rec(node.left)
                    emit(OP_POWI, node, n)
                else:
                    # a^b -> exp(b*ln(a)); every synthesized op is blamed
                    # on the power node
                    rec(node.left)
                    emit(OP_LN, node)
                    rec(node.right)
                    emit(OP_MUL, node)
                    emit(OP_EXP, node)
                return
            rec(node.left)
            rec(node.right)
            emit(
                {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}[node.op],
                node,
            )
        else:
            raise TypeError(f"not an Expr: {node!r}")

    rec(e)

    depth = 0
    height = 0
    for op in ops:
        if op in (OP_CONST, OP_X, OP_Y):
            height += 1
        elif op in (OP_ADD, OP_SUB, OP_MUL, OP_DIV):
            height -= 1
        depth = max(depth, height)

    return Program(
        ops=np.asarray(ops, dtype=np.int64),
        imm=np.asarray(imm, dtype=np.int64),
        consts=np.asarray(consts, dtype=np.float64),
        frags=tuple(frags),
        depth=depth,
        source=source if source is not None else to_text(e),
    )


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _mul10(out, a, b):
    for j in range(10):
        out[j] = 0.0
    for t in range(PROD_N):
        out[PROD_OUT[t]] += PROD_W[t] * a[PROD_A[t]] * b[PROD_B[t]]


@njit(cache=True)
def _compose10(u, g0, g1, g2, g3, sa, sb):
    # u <- g(u) truncated at order 3, via Horner in the zero-value part
    u[0] = 0.0
    for j in range(10):
        sa[j] = 0.0
    sa[0] = g3 / 6.0
    _mul10(sb, sa, u)
    sb[0] += g2 / 2.0
    _mul10(sa, sb, u)
    sa[0] += g1
    _mul10(sb, sa, u)
    sb[0] += g0
    for j in range(10):
        u[j] = sb[j]


@njit(cache=True)
def _run_single(ops, imm, consts, x, y, out, stack, sa, sb, sc):
    sp = 0
    for k in range(ops.shape[0]):
        op = ops[k]
        if op == OP_CONST:
            for j in range(10):
                stack[sp, j] = 0.0
            stack[sp, 0] = consts[imm[k]]
            sp += 1
        elif op == OP_X:
            for j in range(10):
                stack[sp, j] = 0.0
            stack[sp, 0] = x
            stack[sp, 1] = 1.0
            sp += 1
        elif op == OP_Y:
            for j in range(10):
                stack[sp, j] = 0.0
            stack[sp, 0] = y
            stack[sp, 2] = 1.0
            sp += 1
        elif op == OP_ADD:
            for j in range(10):
                stack[sp - 2, j] += stack[sp - 1, j]
            sp -= 1
        elif op == OP_SUB:
            for j in range(10):
                stack[sp - 2, j] -= stack[sp - 1, j]
            sp -= 1
        elif op == OP_MUL:
            _mul10(sa, stack[sp - 2], stack[sp - 1])
            for j in range(10):
                stack[sp - 2, j] = sa[j]
            sp -= 1
        elif op == OP_DIV:
            v0 = stack[sp - 1, 0]
            if v0 == 0.0:
                return ERR_DIV_ZERO, k
            _compose10(
                stack[sp - 1],
                1.0 / v0,
                -1.0 / (v0 * v0),
                2.0 / (v0 * v0 * v0),
                -6.0 / (v0 * v0 * v0 * v0),
                sa,
                sb,
            )
            _mul10(sa, stack[sp - 2], stack[sp - 1])
            for j in range(10):
                stack[sp - 2, j] = sa[j]
            sp -= 1
        elif op == OP_NEG:
            for j in range(10):
                stack[sp - 1, j] = -stack[sp - 1, j]
        elif op == OP_POWI:
            n = imm[k]
            u = stack[sp - 1]
            if n == 0:
                for j in range(10):
                    u[j] = 0.0
                u[0] = 1.0
            else:
                m = n if n > 0 else -n
                for j in range(10):
                    sc[j] = u[j]
                for _ in range(m - 1):
                    _mul10(sa, sc, u)
                    for j in range(10):
                        sc[j] = sa[j]
                if n < 0:
                    v0 = sc[0]
                    if v0 == 0.0:
                        return ERR_DIV_ZERO, k
                    _compose10(
                        sc,
                        1.0 / v0,
                        -1.0 / (v0 * v0),
                        2.0 / (v0 * v0 * v0),
                        -6.0 / (v0 * v0 * v0 * v0),
                        sa,
                        sb,
                    )
                for j in range(10):
                    u[j] = sc[j]
        elif op == OP_EXP:
            g = math.exp(stack[sp - 1, 0])
            _compose10(stack[sp - 1], g, g, g, g, sa, sb)
        elif op == OP_LN:
            v0 = stack[sp - 1, 0]
            if v0 <= 0.0:
                return ERR_LN_DOMAIN, k
            _compose10(
                stack[sp - 1],
                math.log(v0),
                1.0 / v0,
                -1.0 / (v0 * v0),
                2.0 / (v0 * v0 * v0),
                sa,
                sb,
            )
        elif op == OP_SIN:
            s = math.sin(stack[sp - 1, 0])
            c = math.cos(stack[sp - 1, 0])
            _compose10(stack[sp - 1], s, c, -s, -c, sa, sb)
        elif op == OP_COS:
            s = math.sin(stack[sp - 1, 0])
            c = math.cos(stack[sp - 1, 0])
            _compose10(stack[sp - 1], c, -s, -c, s, sa, sb)
        elif op == OP_SQRT:
            v0 = stack[sp - 1, 0]
            if v0 <= 0.0:
                return ERR_SQRT_DOMAIN, k
            s = math.sqrt(v0)
            _compose10(
                stack[sp - 1],
                s,
                0.5 / s,
                -0.25 / (s * v0),
                0.375 / (s * v0 * v0),
                sa,
                sb,
            )
        for j in range(10):
            if not math.isfinite(stack[sp - 1, j]):
                return ERR_NOT_FINITE, k
    for j in range(10):
        out[j] = stack[0, j]
    return ERR_OK, -1


@njit(cache=True)
def _run_single_alloc(ops, imm, consts, depth, x, y):
    out = np.empty(10)
    stack = np.empty((depth, 10))
    sa = np.empty(10)
    sb = np.empty(10)
    sc = np.empty(10)
    code, at = _run_single(ops, imm, consts, x, y, out, stack, sa, sb, sc)
    return code, at, out


@njit(cache=True)
def _run_batch(ops, imm, consts, depth, xs, ys):
    n = xs.shape[0]
    out = np.empty((n, 10))
    codes = np.empty(n, dtype=np.int64)
    opidx = np.empty(n, dtype=np.int64)
    stack = np.empty((depth, 10))
    sa = np.empty(10)
    sb = np.empty(10)
    sc = np.empty(10)
    for i in range(n):
        code, at = _run_single(
            ops, imm, consts, xs[i], ys[i], out[i], stack, sa, sb, sc
        )
        codes[i] = code
        opidx[i] = at
    return out, codes, opidx


# ---------------------------------------------------------------------------
# pure-numpy fallback (vectorized across evaluation points)
# ---------------------------------------------------------------------------


# scatter matrix folding the Leibniz weights: row k collects the product
# terms that land in jet slot k, so a truncated product is one matmul
_SCATTER = np.zeros((JET_SIZE, PROD_N))
_SCATTER[PROD_OUT, np.arange(PROD_N)] = PROD_W


def _mul10_np(a, b):
    return _SCATTER @ (a[PROD_A] * b[PROD_B])


def _compose10_np(u, g0, g1, g2, g3):
    u = u.copy()
    u[0] = 0.0
    acc = np.zeros_like(u)
    acc[0] = g3 / 6.0
    acc = _mul10_np(acc, u)
    acc[0] += g2 / 2.0
    acc = _mul10_np(acc, u)
    acc[0] += g1
    acc = _mul10_np(acc, u)
    acc[0] += g0
    return acc


def _run_batch_numpy(ops, imm, consts, depth, xs, ys):
    n = xs.shape[0]
    stack = np.zeros((depth, 10, n))
    codes = np.zeros(n, dtype=np.int64)
    opidx = np.full(n, -1, dtype=np.int64)
    ok = np.ones(n, dtype=bool)

    def fail(mask, code, k):
        new = mask & ok
        codes[new] = code
        opidx[new] = k
        ok[new] = False

    with np.errstate(all="ignore"):
        sp = 0
        for k in range(ops.shape[0]):
            op = ops[k]
            if op == OP_CONST:
                stack[sp] = 0.0
                stack[sp, 0] = consts[imm[k]]
                sp += 1
            elif op == OP_X:
                stack[sp] = 0.0
                stack[sp, 0] = xs
                stack[sp, 1] = 1.0
                sp += 1
            elif op == OP_Y:
                stack[sp] = 0.0
                stack[sp, 0] = ys
                stack[sp, 2] = 1.0
                sp += 1
            elif op == OP_ADD:
                stack[sp - 2] += stack[sp - 1]
                sp -= 1
            elif op == OP_SUB:
                stack[sp - 2] -= stack[sp - 1]
                sp -= 1
            elif op == OP_MUL:
                stack[sp - 2] = _mul10_np(stack[sp - 2], stack[sp - 1])
                sp -= 1
            elif op == OP_DIV:
                v0 = stack[sp - 1, 0]
                fail(v0 == 0.0, ERR_DIV_ZERO, k)
                v0 = np.where(v0 == 0.0, 1.0, v0)
                recip = _compose10_np(
                    stack[sp - 1], 1.0 / v0, -1.0 / v0**2, 2.0 / v0**3, -6.0 / v0**4
                )
                stack[sp - 2] = _mul10_np(stack[sp - 2], recip)
                sp -= 1
            elif op == OP_NEG:
                stack[sp - 1] = -stack[sp - 1]
            elif op == OP_POWI:
                m = imm[k]
                u = stack[sp - 1]
                if m == 0:
                    stack[sp - 1] = 0.0
                    stack[sp - 1, 0] = 1.0
                else:
                    acc = u.copy()
                    for _ in range(abs(m) - 1):
                        acc = _mul10_np(acc, u)
                    if m < 0:
                        v0 = acc[0]
                        fail(v0 == 0.0, ERR_DIV_ZERO, k)
                        v0 = np.where(v0 == 0.0, 1.0, v0)
                        acc = _compose10_np(
                            acc, 1.0 / v0, -1.0 / v0**2, 2.0 / v0**3, -6.0 / v0**4
                        )
                    stack[sp - 1] = acc
            elif op == OP_EXP:
                g = np.exp(stack[sp - 1, 0])
                stack[sp - 1] = _compose10_np(stack[sp - 1], g, g, g, g)
            elif op == OP_LN:
                v0 = stack[sp - 1, 0]
                fail(v0 <= 0.0, ERR_LN_DOMAIN, k)
                v0 = np.where(v0 <= 0.0, 1.0, v0)
                stack[sp - 1, 0] = v0
                stack[sp - 1] = _compose10_np(
                    stack[sp - 1], np.log(v0), 1.0 / v0, -1.0 / v0**2, 2.0 / v0**3
                )
            elif op == OP_SIN:
                s = np.sin(stack[sp - 1, 0])
                c = np.cos(stack[sp - 1, 0])
                stack[sp - 1] = _compose10_np(stack[sp - 1], s, c, -s, -c)
            elif op == OP_COS:
                s = np.sin(stack[sp - 1, 0])
                c = np.cos(stack[sp - 1, 0])
                stack[sp - 1] = _compose10_np(stack[sp - 1], c, -s, -c, s)
            elif op == OP_SQRT:
                v0 = stack[sp - 1, 0]
                fail(v0 <= 0.0, ERR_SQRT_DOMAIN, k)
                v0 = np.where(v0 <= 0.0, 1.0, v0)
                stack[sp - 1, 0] = v0
                s = np.sqrt(v0)
                stack[sp - 1] = _compose10_np(
                    stack[sp - 1], s, 0.5 / s, -0.25 / (s * v0), 0.375 / (s * v0 * v0)
                )
            fail(~np.isfinite(stack[sp - 1]).all(axis=0), ERR_NOT_FINITE, k)
            bad = ~ok
            if bad.any():
                stack[sp - 1][:, bad] = 1.0

    return np.ascontiguousarray(stack[0].T), codes, opidx


# ---------------------------------------------------------------------------
# public evaluation API
# ---------------------------------------------------------------------------


def _raise_eval_error(program: Program, code: int, at: int, x: float, y: float):
    frag = program.frags[at] if 0 <= at < len(program.frags) else program.source
    raise EvalDomainError(_ERR_TEXT.get(int(code), "evaluation error"), frag, (x, y))


def jet_coeffs(program: Program, x: float, y: float, backend: str | None = None):
    """Raw coefficient vector of the order-3 jet at one point.

    Raises :class:`EvalDomainError` naming the offending subexpression
    and point on any domain violation or overflow.
    """
    b = backend or default_backend()
    if b == "numba":
        code, at, out = _run_single_alloc(
            program.ops, program.imm, program.consts, program.depth, float(x), float(y)
        )
        if code != ERR_OK:
            _raise_eval_error(program, code, at, x, y)
        return out
    out, codes, opidx = _run_batch_numpy(
        program.ops,
        program.imm,
        program.consts,
        program.depth,
        np.array([float(x)]),
        np.array([float(y)]),
    )
    if codes[0] != ERR_OK:
        _raise_eval_error(program, codes[0], opidx[0], x, y)
    return out[0]


def jet_coeffs_many(program: Program, xs, ys, backend: str | None = None):
    """Batch jets at many points.

    Non-raising: returns (coeffs (n, 10), codes (n,), opidx (n,)) with
    code 0 marking successful points.
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64).ravel()
    ys = np.ascontiguousarray(ys, dtype=np.float64).ravel()
    b = backend or default_backend()
    if b == "numba":
        return _run_batch(program.ops, program.imm, program.consts, program.depth, xs, ys)
    return _run_batch_numpy(program.ops, program.imm, program.consts, program.depth, xs, ys)


def error_message(program: Program, code: int, at: int) -> str:
    frag = program.frags[at] if 0 <= at < len(program.frags) else program.source
    return f"{_ERR_TEXT.get(int(code), 'evaluation error')} in {frag!r}"


def eval_jet3(e: Expr | str, point, backend: str | None = None) -> Jet3:
    """Value plus all partial derivatives through order 3 at a point."""
    program = compile_expr(e)
    return Jet3(jet_coeffs(program, point[0], point[1], backend=backend))


def gradient(e: Expr | str, point, backend: str | None = None) -> tuple[float, float]:
    """(df/dx, df/dy) at a point, projected out of the order-3 jet."""
    c = jet_coeffs(compile_expr(e), point[0], point[1], backend=backend)
    return float(c[1]), float(c[2])
