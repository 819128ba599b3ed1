"""
度量表达式前端：把用户给出的 F(x, y) 字符串解析成可在浮点数和 HyperJet 上求值的形式。

语法（'^' 比一元负号结合得更紧，右结合）:

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := number | ident | ident '(' args ')' | '(' expr ')'

因此 "-2^2" = -4，"2^-1" = 0.5，"2^3^2" = 512。
"""
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

import hyperjet
from constants import HOMOGENEITY_RTOL, HOMOGENEITY_SAMPLES
from hyperjet import HyperJet, Scalar
from utils.exceptions import (
    ArityError, EvaluationError, ExpressionError, HomogeneityError, ParseError,
    UnknownIdentifierError,
)
from utils.seeding import rng

Position = Tuple[int, int]

FUNCTIONS: Dict[str, Tuple[int, Callable[..., Scalar]]] = {
    "sqrt": (1, hyperjet.sqrt),
    "exp": (1, hyperjet.exp),
    "log": (1, hyperjet.log),
    "sin": (1, hyperjet.sin),
    "cos": (1, hyperjet.cos),
    "tanh": (1, hyperjet.tanh),
    "pow": (2, hyperjet.power),
}

_BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "^": hyperjet.power,
}


# --- AST ---
@dataclass(frozen=True)
class Num:
    value: float
    pos: Position = field(default=(0, 0), compare=False)

@dataclass(frozen=True)
class Var:
    name: str
    pos: Position = field(default=(0, 0), compare=False)

@dataclass(frozen=True)
class Neg:
    operand: "Node"
    pos: Position = field(default=(0, 0), compare=False)

@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    pos: Position = field(default=(0, 0), compare=False)

@dataclass(frozen=True)
class Call:
    func: str
    args: Tuple["Node", ...]
    pos: Position = field(default=(0, 0), compare=False)

Node = Union[Num, Var, Neg, BinOp, Call]


# --- 词法分析 ---
_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r\n]+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
)

@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: Position


def _tokenize(source: str) -> List[_Token]:
    tokens = []
    line, col, i = 1, 1, 0
    while i < len(source):
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise ParseError(f"无法识别的字符 {source[i]!r}", (line, col))
        text = m.group()
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, text, (line, col)))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        i = m.end()
    tokens.append(_Token("eof", "", (line, col)))
    return tokens


# --- 递归下降语法分析 ---
class _Parser:
    def __init__(self, tokens: List[_Token], variables: Sequence[str]):
        self.tokens = tokens
        self.i = 0
        self.variables = set(variables)

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text or tok.kind not in ("op",):
            found = tok.text or "输入结束"
            raise ParseError(f"期望 {text!r}，实际为 {found!r}", tok.pos)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "eof":
            raise ParseError(f"多余的输入 {tok.text!r}", tok.pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            tok = self.advance()
            node = BinOp(tok.text, node, self.term(), tok.pos)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            tok = self.advance()
            node = BinOp(tok.text, node, self.unary(), tok.pos)
        return node

    def unary(self) -> Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(self.unary(), tok.pos)
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary(), tok.pos)
        return base

    def primary(self) -> Node:
        tok = self.advance()
        if tok.kind == "num":
            value = float(tok.text)
            if not math.isfinite(value):
                raise ParseError(f"数值溢出 {tok.text!r}", tok.pos)
            return Num(value, tok.pos)
        if tok.kind == "ident":
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "(":
                return self.call(tok)
            if tok.text in FUNCTIONS:
                raise ParseError(f"函数 {tok.text!r} 缺少参数列表", tok.pos)
            if tok.text not in self.variables:
                raise UnknownIdentifierError(f"未知标识符 {tok.text!r}", tok.pos)
            return Var(tok.text, tok.pos)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = tok.text or "输入结束"
        raise ParseError(f"意外的 {found!r}", tok.pos)

    def call(self, name: _Token) -> Node:
        if name.text not in FUNCTIONS:
            raise UnknownIdentifierError(f"未知函数 {name.text!r}", name.pos)
        self.expect("(")
        args = [self.expr()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        arity = FUNCTIONS[name.text][0]
        if len(args) != arity:
            raise ArityError(f"函数 {name.text}() 需要 {arity} 个参数，实际 {len(args)} 个", name.pos)
        return Call(name.text, tuple(args), name.pos)


def parse_expression(source: Union[str, bytes], variables: Sequence[str]) -> Node:
    """解析任意表达式（不做齐次性检查），返回 AST。"""
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"源文本不是有效的 UTF-8: {e.reason}", (1, e.start + 1)) from e
    if not isinstance(source, str):
        raise ParseError(f"表达式必须是字符串，实际为 {type(source).__name__}", (1, 1))
    if not source.strip():
        raise ParseError("表达式为空", (1, 1))
    try:
        return _Parser(_tokenize(source), variables).parse()
    except RecursionError:
        raise ParseError("表达式嵌套过深", (1, 1)) from None


def pretty(node: Node) -> str:
    """完全加括号的打印形式，重新解析得到相同的 AST。"""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{pretty(node.operand)})"
    if isinstance(node, BinOp):
        return f"({pretty(node.left)} {node.op} {pretty(node.right)})"
    return f"{node.func}({', '.join(pretty(a) for a in node.args)})"


# --- 编译为闭包 ---
Env = Dict[str, Scalar]

def _guard(fn: Callable[[Env], Scalar], node: Node) -> Callable[[Env], Scalar]:
    def guarded(env: Env) -> Scalar:
        try:
            return fn(env)
        except (ValueError, ZeroDivisionError, OverflowError) as e:
            raise EvaluationError(f"求值失败: {e}", node.pos) from e
    return guarded


def _compile(node: Node) -> Callable[[Env], Scalar]:
    if isinstance(node, Num):
        value = node.value
        return lambda env: value
    if isinstance(node, Var):
        name = node.name
        return lambda env: env[name]
    if isinstance(node, Neg):
        inner = _compile(node.operand)
        return lambda env: -inner(env)
    if isinstance(node, BinOp):
        left, right, op = _compile(node.left), _compile(node.right), _BINARY[node.op]
        return _guard(lambda env: op(left(env), right(env)), node)
    fn = FUNCTIONS[node.func][1]
    args = [_compile(a) for a in node.args]
    return _guard(lambda env: fn(*(a(env) for a in args)), node)


def variable_names(n: int, with_fiber: bool = True) -> List[str]:
    names = [f"x{i + 1}" for i in range(n)]
    if with_fiber:
        names += [f"y{i + 1}" for i in range(n)]
    return names


@dataclass(frozen=True)
class MetricExpression:
    source: str
    ast: Node
    n: int
    variables: Tuple[str, ...]
    _fn: Callable[[Env], Scalar] = field(repr=False, compare=False)

    def evaluate(self, x: Sequence[Scalar], y: Optional[Sequence[Scalar]] = None) -> Scalar:
        env: Env = {f"x{i + 1}": x[i] for i in range(self.n)}
        if y is not None:
            env.update({f"y{i + 1}": y[i] for i in range(self.n)})
        return self._fn(env)


def compile_expression(source: Union[str, bytes], n: int, with_fiber: bool = True) -> MetricExpression:
    variables = variable_names(n, with_fiber)
    ast = parse_expression(source, variables)
    text = source.decode("utf-8") if isinstance(source, bytes) else source
    return MetricExpression(text, ast, n, tuple(variables), _compile(ast))


def parse_metric(source: Union[str, bytes], n: int, seed: int = 0) -> MetricExpression:
    """解析 F(x, y) 并在加载时数值验证关于 y 的正一次齐次性。"""
    if n < 2:
        raise ExpressionError(f"维数必须至少为 2，实际为 {n}")
    e = compile_expression(source, n)
    gen = rng(seed, "homogeneity", e.source)
    for k in range(HOMOGENEITY_SAMPLES):
        x = gen.uniform(-0.3, 0.3, size=n).tolist()
        y = gen.normal(size=n).tolist()
        lam = float(gen.choice([0.5, 2.0, 10.0]))
        f = float(e.evaluate(x, y))
        f_scaled = float(e.evaluate(x, [lam * c for c in y]))
        if abs(f_scaled - lam * f) > HOMOGENEITY_RTOL * max(abs(lam * f), 1e-300):
            raise HomogeneityError(
                f"表达式关于 y 不是正一次齐次的: F(x, {lam}y) = {f_scaled:.6g}, {lam}F(x, y) = {lam * f:.6g}"
            )
    return e


def eval_expression(e: MetricExpression, x: Sequence[float], y: Sequence[float], taylor_order: int = 0) -> Scalar:
    """
    taylor_order = 0 返回浮点数；1 或 2 返回关于 (x1..xn, y1..yn) 的 HyperJet
    （梯度在 grad，二阶导在 hess）。
    """
    if taylor_order not in (0, 1, 2):
        raise ExpressionError(f"taylor_order 必须是 0、1 或 2，实际为 {taylor_order}")
    if taylor_order == 0:
        return float(e.evaluate([float(c) for c in x], [float(c) for c in y]))
    seeds = HyperJet.seed(np.concatenate([np.asarray(x, float), np.asarray(y, float)]))
    result = e.evaluate(seeds[:e.n], seeds[e.n:])
    if not isinstance(result, HyperJet):
        size = 2 * e.n
        result = HyperJet(float(result), np.zeros(size), np.zeros((size, size)))
    return result
