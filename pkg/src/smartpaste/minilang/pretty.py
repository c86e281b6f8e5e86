"""Canonical single-space formatting of MiniLang ASTs (round-trip tests)."""

from __future__ import annotations

from typing import List

from . import ast


def _type(ref: ast.TypeRef) -> List[str]:
    out = [ref.name]
    if ref.is_array:
        out += ["[", "]"]
    return out


def _expr(e: ast.Expr) -> List[str]:
    if isinstance(e, ast.Var):
        return [e.name]
    if isinstance(e, ast.Literal):
        if e.kind == "bool":
            return ["true" if e.value else "false"]
        if e.kind == "string":
            return ['"%s"' % e.value]
        return [str(e.value)]
    if isinstance(e, ast.Unary):
        return [e.op, "("] + _expr(e.operand) + [")"]
    if isinstance(e, ast.Binary):
        return ["("] + _expr(e.left) + [e.op] + _expr(e.right) + [")"]
    if isinstance(e, ast.Index):
        return _expr(e.base) + ["["] + _expr(e.index) + ["]"]
    if isinstance(e, ast.Call):
        out = [e.func, "("]
        for i, a in enumerate(e.args):
            if i:
                out.append(",")
            out += _expr(a)
        out.append(")")
        return out
    raise AssertionError(f"unhandled expression {e!r}")


def _simple_stmt(s: ast.Stmt) -> List[str]:
    """A statement without its trailing ';' (for use in for-headers)."""
    if isinstance(s, ast.Decl):
        out = _type(s.type) + [s.name]
        if s.init is not None:
            out += ["="] + _expr(s.init)
        return out
    if isinstance(s, ast.Assign):
        return _expr(s.target) + [s.op] + _expr(s.value)
    if isinstance(s, ast.IncDec):
        return _expr(s.target) + [s.op]
    if isinstance(s, ast.ExprStmt):
        return _expr(s.expr)
    raise AssertionError(f"not a simple statement: {s!r}")


def _stmt(s: ast.Stmt) -> List[str]:
    if isinstance(s, ast.Block):
        out = ["{"]
        for sub in s.statements:
            out += _stmt(sub)
        out.append("}")
        return out
    if isinstance(s, ast.If):
        out = ["if", "("] + _expr(s.cond) + [")"] + _stmt(s.then)
        if s.orelse is not None:
            out += ["else"] + _stmt(s.orelse)
        return out
    if isinstance(s, ast.While):
        return ["while", "("] + _expr(s.cond) + [")"] + _stmt(s.body)
    if isinstance(s, ast.For):
        out = ["for", "("]
        if s.init is not None:
            out += _simple_stmt(s.init)
        out.append(";")
        if s.cond is not None:
            out += _expr(s.cond)
        out.append(";")
        if s.step is not None:
            out += _simple_stmt(s.step)
        out += [")"] + _stmt(s.body)
        return out
    if isinstance(s, ast.Return):
        out = ["return"]
        if s.value is not None:
            out += _expr(s.value)
        out.append(";")
        return out
    return _simple_stmt(s) + [";"]


def pretty_print(program: ast.Program) -> str:
    out: List[str] = []
    for td in program.type_decls:
        out += ["type", td.name]
        if td.supers:
            out.append("implements")
            for i, sup in enumerate(td.supers):
                if i:
                    out.append(",")
                out.append(sup)
        out.append(";")
    for ex in program.extern_fns:
        out += ["extern", "fn", ex.name, "("]
        for i, pt in enumerate(ex.param_types):
            if i:
                out.append(",")
            out += _type(pt)
        out += [")", "->"] + _type(ex.return_type) + [";"]
    for fn in program.functions:
        out += _type(fn.return_type) + [fn.name, "("]
        for i, p in enumerate(fn.params):
            if i:
                out.append(",")
            out += _type(p.type) + [p.name]
        out += [")"] + _stmt(fn.body)
    return " ".join(out)
