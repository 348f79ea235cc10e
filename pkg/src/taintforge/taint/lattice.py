"""Taint lattice: per-value dual-channel taint triplets and provenance.

A triplet records whole-value taint (`self`) plus per-element taint for
arrays: `arr_s` keyed by statically known keys, `arr_r` keyed symbolically
by key-variable name and scalar type.  Canonical form keeps the maps empty
for scalar values (self is then the whole story) and derives `self` from the
recorded elements otherwise, so the triplet invariants hold by construction:
self=τ iff every recorded element is τ, self=μ iff every recorded element
is μ, mixed elements force the partial state τ̂.

Joins form a semilattice: scalar joins take the larger state, a fully
tainted scalar absorbs any array, a safe scalar is neutral, and array/array
joins merge element maps keywise (missing keys default safe, conflicts take
tainted).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

MU = 0        # safe
PARTIAL = 1   # τ̂ — some elements tainted
TAU = 2       # tainted

_GLYPH = {MU: "mu", PARTIAL: "partial", TAU: "tau"}


@dataclass(frozen=True)
class SymKey:
    """Symbolic array key: the key variable's name and scalar type."""
    name: str
    type: str = "mixed"

    def __repr__(self) -> str:
        return f"{self.name}:{self.type}"


ConstKey = Union[str, int]


def _s_order(item: tuple[ConstKey, int]):
    key = item[0]
    if isinstance(key, str):
        return (1, key, 0)
    return (0, "", key)


@dataclass(frozen=True)
class TaintTriplet:
    self_t: int = MU
    arr_s: tuple[tuple[ConstKey, int], ...] = ()
    arr_r: tuple[tuple[SymKey, int], ...] = ()

    @property
    def is_scalar(self) -> bool:
        return not self.arr_s and not self.arr_r

    @property
    def tainted(self) -> bool:
        return self.self_t == TAU

    def s_map(self) -> dict[ConstKey, int]:
        return dict(self.arr_s)

    def r_map(self) -> dict[SymKey, int]:
        return dict(self.arr_r)

    def element_states(self) -> list[int]:
        return [v for _, v in self.arr_s] + [v for _, v in self.arr_r]

    def any_element_tainted(self) -> bool:
        return any(v == TAU for v in self.element_states())

    def __repr__(self) -> str:
        head = {MU: "mu", PARTIAL: "~tau", TAU: "tau"}[self.self_t]
        if self.is_scalar:
            return head
        parts = [f"{k!r}:{_GLYPH[v]}" for k, v in self.arr_s]
        parts += [f"{k!r}:{_GLYPH[v]}" for k, v in self.arr_r]
        return f"{head}{{{', '.join(parts)}}}"


SAFE = TaintTriplet(MU)
TAINTED = TaintTriplet(TAU)


def scalar_triplet(state: int) -> TaintTriplet:
    return TaintTriplet(state)


def from_elements(s_map: dict[ConstKey, int],
                  r_map: dict[SymKey, int]) -> TaintTriplet:
    """Build an array triplet; self derives from the recorded elements."""
    if not s_map and not r_map:
        return SAFE
    states = list(s_map.values()) + list(r_map.values())
    if all(v == TAU for v in states):
        self_t = TAU
    elif all(v == MU for v in states):
        self_t = MU
    else:
        self_t = PARTIAL
    return TaintTriplet(
        self_t,
        tuple(sorted(s_map.items(), key=_s_order)),
        tuple(sorted(r_map.items(), key=lambda kv: (kv[0].name, kv[0].type))),
    )


def join_triplet(a: TaintTriplet, b: TaintTriplet) -> TaintTriplet:
    if a == b:
        return a
    if a.is_scalar and b.is_scalar:
        return scalar_triplet(max(a.self_t, b.self_t))
    if a.is_scalar:
        if a.self_t == MU:
            return b
        return TAINTED    # whole-value taint absorbs per-element detail
    if b.is_scalar:
        return join_triplet(b, a)
    s_map = a.s_map()
    for key, val in b.arr_s:
        s_map[key] = max(s_map.get(key, MU), val)
    r_map = a.r_map()
    for key, val in b.arr_r:
        r_map[key] = max(r_map.get(key, MU), val)
    return from_elements(s_map, r_map)


def consistent(t: TaintTriplet) -> bool:
    """The triplet invariants, used by the property suites."""
    states = t.element_states()
    if t.self_t == TAU and any(v != TAU for v in states):
        return False
    if t.self_t == MU and any(v != MU for v in states):
        return False
    if t.self_t == PARTIAL and t.is_scalar:
        return False    # partial is always element-derived
    if states:
        expect = TAU if all(v == TAU for v in states) else \
            MU if all(v == MU for v in states) else PARTIAL
        if t.self_t != expect:
            return False
    return True


# ---- provenance ---------------------------------------------------------

@dataclass(frozen=True)
class SourceRoot:
    identifier: str
    file: str
    line: int


@dataclass(frozen=True)
class ParamRoot:
    """Taint that entered through a formal parameter (receiver = -1)."""
    index: int


@dataclass(frozen=True)
class Hop:
    file: str
    line: int
    rule: str
    prev: Union["Hop", SourceRoot, ParamRoot]
    fn: str = ""    # qualified name of the function the hop executed in


Prov = Union[Hop, SourceRoot, ParamRoot]


def root_of(chain: Prov) -> Union[SourceRoot, ParamRoot]:
    node = chain
    while isinstance(node, Hop):
        node = node.prev
    return node


def chain_hops(chain: Prov) -> list[Hop]:
    """Hops ordered source-first."""
    out: list[Hop] = []
    node = chain
    while isinstance(node, Hop):
        out.append(node)
        node = node.prev
    out.reverse()
    return out


def splice(chain: Optional[Prov],
           arg_chains: dict[int, Optional[Prov]]) -> Optional[Prov]:
    """Replace a ParamRoot root with the caller-side chain for that argument."""
    if chain is None:
        return None
    root = root_of(chain)
    if not isinstance(root, ParamRoot):
        return chain
    base = arg_chains.get(root.index)
    if base is None:
        return chain
    rebuilt: Prov = base
    for hop in chain_hops(chain):
        rebuilt = Hop(hop.file, hop.line, hop.rule, rebuilt, hop.fn)
    return rebuilt


def extend(chain: Optional[Prov], file: str, line: int,
           rule: str, fn: str = "") -> Optional[Prov]:
    if chain is None:
        return None
    if isinstance(chain, Hop) and chain.file == file and chain.line == line \
            and chain.rule == rule:
        return chain    # avoid stuttering hops inside fixpoint passes
    return Hop(file, line, rule, chain, fn)


# ---- per-value dual-channel taint --------------------------------------

@dataclass(frozen=True)
class VarTaint:
    tf: TaintTriplet = SAFE     # file-URL channel
    tr: TaintTriplet = SAFE     # request-URL channel
    prov_f: Optional[Prov] = field(default=None, compare=False)
    prov_r: Optional[Prov] = field(default=None, compare=False)

    @property
    def clean(self) -> bool:
        return self.tf == SAFE and self.tr == SAFE

    def __repr__(self) -> str:
        return f"({self.tf!r}, {self.tr!r})"


CLEAN = VarTaint()


def tainted_both(prov_f: Optional[Prov] = None,
                 prov_r: Optional[Prov] = None) -> VarTaint:
    return VarTaint(TAINTED, TAINTED, prov_f, prov_r)


def join_taint(a: VarTaint, b: VarTaint) -> VarTaint:
    if a == b:
        # taint states agree; keep a's provenance, fall back to b's
        return VarTaint(a.tf, a.tr, a.prov_f or b.prov_f, a.prov_r or b.prov_r)
    tf = join_triplet(a.tf, b.tf)
    tr = join_triplet(a.tr, b.tr)
    prov_f = a.prov_f if a.tf.self_t != MU or a.tf.any_element_tainted() else None
    prov_f = prov_f or b.prov_f
    prov_r = a.prov_r if a.tr.self_t != MU or a.tr.any_element_tainted() else None
    prov_r = prov_r or b.prov_r
    return VarTaint(tf, tr, prov_f, prov_r)


def join_taints(items: list[VarTaint]) -> VarTaint:
    acc = CLEAN
    for item in items:
        acc = join_taint(acc, item)
    return acc
