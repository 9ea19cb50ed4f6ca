"""ASCII printer and parser for trees, plus JSON export of sectors.

Syntax: ``1``, ``Xi``, ``Psi`` (= ``I(Xi)``), ``C1``, ``C2``, ``X0`` (time) and
``X1..Xd``, products with ``*``, integer powers with ``^``, integration
``I(...)``, ``I_i(...)`` for a single derivative and ``I[k0,...,kd](...)``.
"""
from __future__ import annotations

import json
import re

from .lincomb import LinComb, TensorComb
from .trees import (
    DEFAULT, ONE, XI, Structure, Tree, canonicalize, csym, homogeneity, poly,
    unit_index, zero_index,
)


def to_ascii(t: Tree) -> str:
    tag = t[0]
    if tag == "1":
        return "1"
    if tag == "Xi":
        return "Xi"
    if tag == "C":
        return f"C{t[1]}"
    if tag == "X":
        parts = []
        for mu, p in enumerate(t[1]):
            if p:
                parts.append(f"X{mu}" + (f"^{p}" if p > 1 else ""))
        return "*".join(parts)
    if tag == "I":
        k, arg = t[1], t[2]
        if arg == XI and not any(k):
            return "Psi"
        if not any(k):
            head = "I"
        elif sum(k) == 1:
            head = f"I_{k.index(1)}"
        else:
            head = "I[" + ",".join(str(v) for v in k) + "]"
        return f"{head}({to_ascii(arg)})"
    out = []
    fs = list(t[1])
    i = 0
    while i < len(fs):
        j = i
        while j < len(fs) and fs[j] == fs[i]:
            j += 1
        s = to_ascii(fs[i])
        n = j - i
        if n > 1:
            s = f"{s}^{n}"
        out.append(s)
        i = j
    return "*".join(out)


_TOKEN = re.compile(r"\s*(Psi|Xi|X\d+|C[12]|I_\d+|I\[[\d,\s]*\]|I|\d+|[()*^])")


def _tokenize(s: str):
    pos = 0
    toks = []
    s = s.strip()
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if not m:
            raise ValueError(f"cannot parse tree at position {pos}: {s[pos:]!r}")
        toks.append(m.group(1))
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, toks, d):
        self.toks = toks
        self.i = 0
        self.d = d

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expect=None):
        tok = self.peek()
        if tok is None or (expect is not None and tok != expect):
            raise ValueError(f"expected {expect!r}, got {tok!r}")
        self.i += 1
        return tok

    def expr(self):
        fs = [self.term()]
        while self.peek() == "*":
            self.take("*")
            fs.append(self.term())
        return ("P", tuple(fs)) if len(fs) > 1 else fs[0]

    def term(self):
        a = self.atom()
        if self.peek() == "^":
            self.take("^")
            n = int(self.take())
            return ("P", tuple([a] * n)) if n != 1 else a
        return a

    def atom(self):
        tok = self.take()
        d = self.d
        if tok == "1":
            return ONE
        if tok == "Xi":
            return XI
        if tok == "Psi":
            return ("I", zero_index(d), XI)
        if tok in ("C1", "C2"):
            return csym(int(tok[1]))
        if tok.startswith("X"):
            mu = int(tok[1:])
            if mu > d:
                raise ValueError(f"X{mu} exceeds dimension d={d}")
            return poly(unit_index(mu, d))
        if tok.startswith("I"):
            if tok == "I":
                k = zero_index(d)
            elif tok.startswith("I_"):
                k = unit_index(int(tok[2:]), d)
            else:
                k = tuple(int(v) for v in tok[2:-1].split(","))
                if len(k) != d + 1:
                    raise ValueError(f"multi-index {k} does not match d={d}")
            self.take("(")
            arg = self.expr()
            self.take(")")
            return ("I", k, arg)
        if tok == "(":
            e = self.expr()
            self.take(")")
            return e
        raise ValueError(f"unexpected token {tok!r}")


def parse(s: str, d: int = 3) -> Tree:
    p = _Parser(_tokenize(s), d)
    t = p.expr()
    if p.peek() is not None:
        raise ValueError(f"trailing input after tree: {p.toks[p.i:]}")
    return canonicalize(t)


def _coef(c) -> str:
    return str(c) if c.denominator != 1 else str(c.numerator)


def lincomb_to_ascii(v: LinComb) -> str:
    if not v:
        return "0"
    parts = []
    for t, c in v.sorted_items():
        parts.append(f"{_coef(c)} {to_ascii(t)}")
    return " + ".join(parts)


def tensor_to_ascii(v: TensorComb) -> str:
    if not v:
        return "0"
    return " + ".join(f"{_coef(c)} {to_ascii(a)} ⊗ {to_ascii(b)}" for (a, b), c in v.sorted_items())


def sector_to_json(trees, S: Structure = DEFAULT) -> str:
    rows = []
    for t in trees:
        h = homogeneity(t)
        rows.append({
            "tree": to_ascii(t),
            "c0": h.c0,
            "c1": h.c1,
            "c2": h.c2,
            "value": float(h.at(S)),
        })
    meta = {"alpha": str(S.alpha), "delta0": str(S.delta0), "d": S.d, "format": "wzphi4-sector-v1"}
    return json.dumps({"meta": meta, "trees": rows}, indent=2, sort_keys=True)
