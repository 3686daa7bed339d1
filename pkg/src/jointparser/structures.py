"""Parser state: fragments on three stacks, the action history, and phases.

The buffer is itself a stack whose top is the sentence front; tokens are
pushed right to left at initialization with the root symbol at the very
bottom, so the root reaches the front only after every word has been
consumed.  Fragments are immutable and freely shared between states.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .conll import Sentence, Token

ROOT = 0           # index of the root symbol
ROOT_FORM = "root"

SYNTACTIC = "syntactic"
SEMANTIC = "semantic"

JOINT = "joint"
SYNTAX_ONLY = "syntax"
SEMANTICS_ONLY = "semantics"
MODES = (JOINT, SYNTAX_ONLY, SEMANTICS_ONLY)

# Transition kinds in the canonical order used for tie-breaking.
S_SHIFT = "S-Shift"
S_REDUCE = "S-Reduce"
S_RIGHT = "S-Right"
S_LEFT = "S-Left"
M_SHIFT = "M-Shift"
M_REDUCE = "M-Reduce"
M_RIGHT = "M-Right"
M_LEFT = "M-Left"
M_SWAP = "M-Swap"
M_PRED = "M-Pred"
M_SELF = "M-Self"

KIND_ORDER = (S_SHIFT, S_REDUCE, S_RIGHT, S_LEFT, M_SHIFT, M_REDUCE,
              M_RIGHT, M_LEFT, M_SWAP, M_PRED, M_SELF)
SYNTACTIC_KINDS = frozenset({S_SHIFT, S_REDUCE, S_RIGHT, S_LEFT})
SEMANTIC_KINDS = frozenset({M_SHIFT, M_REDUCE, M_RIGHT, M_LEFT,
                            M_SWAP, M_PRED, M_SELF})
_LABELED = frozenset({S_RIGHT, S_LEFT})
_ROLED = frozenset({M_RIGHT, M_LEFT, M_SELF})


@dataclass(frozen=True)
class Transition:
    """A parser action; exactly one parameter slot is filled per kind."""

    kind: str
    label: str | None = None
    role: str | None = None
    sense: str | None = None

    def __post_init__(self):
        if self.kind not in KIND_ORDER:
            raise ValueError(f"unknown transition kind {self.kind!r}")
        wants_label = self.kind in _LABELED
        wants_role = self.kind in _ROLED
        wants_sense = self.kind == M_PRED
        if wants_label != (self.label is not None):
            raise ValueError(f"{self.kind}: bad label slot")
        if wants_role != (self.role is not None):
            raise ValueError(f"{self.kind}: bad role slot")
        if wants_sense != (self.sense is not None):
            raise ValueError(f"{self.kind}: bad sense slot")

    @property
    def param(self) -> str | None:
        return self.label if self.label is not None else \
            self.role if self.role is not None else self.sense

    def key(self) -> str:
        """Canonical `KIND` or `KIND:param` string, also the action-vocab key."""
        return self.kind if self.param is None else f"{self.kind}:{self.param}"

    @staticmethod
    def from_key(key: str) -> "Transition":
        kind, _, param = key.partition(":")
        if not param:
            return Transition(kind)
        if kind in _LABELED:
            return Transition(kind, label=param)
        if kind in _ROLED:
            return Transition(kind, role=param)
        if kind == M_PRED:
            return Transition(kind, sense=param)
        raise ValueError(f"{kind} takes no parameter")

    def pretty(self) -> str:
        return self.kind if self.param is None else f"{self.kind}({self.param})"


@dataclass(frozen=True, eq=False)
class Fragment:
    """A parse fragment: the root token index, the attachment tree built so
    far, and (when a parameter view is attached) its vector representation.

    `node` is nested tuples: ("leaf", index), ("attach", head, dep, label,
    layer), or ("pred", child, sense).  The vector half is excluded from
    equality; symbolic contexts leave it None.
    """

    root: int
    node: tuple
    vector: object = None

    def __eq__(self, other):
        if not isinstance(other, Fragment):
            return NotImplemented
        return self.root == other.root and self.node == other.node

    def __hash__(self):
        return hash((self.root, self.node))

    def with_vector(self, vector) -> "Fragment":
        return replace(self, vector=vector)


def leaf(index: int, vector=None) -> Fragment:
    return Fragment(index, ("leaf", index), vector)


def attach(head: Fragment, dep: Fragment, label: str, layer: str,
           vector=None) -> Fragment:
    return Fragment(head.root, ("attach", head.node, dep.node, label, layer),
                    vector)


def predicated(frag: Fragment, sense: str, vector=None) -> Fragment:
    return Fragment(frag.root, ("pred", frag.node, sense), vector)


@dataclass
class ParserState:
    """Single-owner mutable configuration: stacks S, M, B plus history A.

    Lists hold their top at the end.  `view`, when present, mirrors every
    structural operation onto stack LSTMs; symbolic runs leave it None.
    """

    tokens: list[Token]
    S: list[Fragment]
    M: list[Fragment]
    B: list[Fragment]
    A: list[Transition]
    phase: str
    mode: str
    created_syn: dict[tuple[int, int], str]
    created_sem: dict[tuple[int, int], str]
    created_preds: dict[int, str]
    heads: dict[int, int]
    last_swapped: frozenset | None = None
    pred_candidates: frozenset | None = None
    view: object = None

    def front(self) -> Fragment:
        return self.B[-1]

    def form_of(self, index: int) -> str:
        return ROOT_FORM if index == ROOT else self.tokens[index - 1].form

    def is_candidate(self, index: int) -> bool:
        if index == ROOT:
            return False
        if self.pred_candidates is None:
            return True
        return index in self.pred_candidates

    def clone(self) -> "ParserState":
        if self.view is not None:
            raise ValueError("cannot clone a state with an attached view")
        return ParserState(self.tokens, list(self.S), list(self.M),
                           list(self.B), list(self.A), self.phase, self.mode,
                           dict(self.created_syn), dict(self.created_sem),
                           dict(self.created_preds), dict(self.heads),
                           self.last_swapped, self.pred_candidates, None)

    def snapshot(self) -> tuple:
        """Hashable summary of everything that defines the configuration."""
        return (tuple(self.S), tuple(self.M), tuple(self.B), tuple(self.A),
                self.phase, tuple(sorted(self.created_syn.items())),
                tuple(sorted(self.created_sem.items())),
                tuple(sorted(self.created_preds.items())), self.last_swapped)


def initial_state(sentence: Sentence, mode: str = JOINT,
                  pred_candidates: frozenset | None = None,
                  view=None) -> ParserState:
    """Build the start configuration for a sentence.

    The buffer receives the root symbol first and then the words from right
    to left, leaving token 1 on top.  `pred_candidates` restricts which
    tokens M-Pred and friends may treat as predicates; None leaves every
    word eligible.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if not sentence.tokens:
        raise ValueError("cannot parse an empty sentence")
    buffer: list[Fragment] = []
    root_frag = leaf(ROOT, view.root_atomic() if view else None)
    buffer.append(root_frag)
    if view:
        view.buf_push(root_frag.vector)
    for tok in reversed(sentence.tokens):
        frag = leaf(tok.index, view.atomic(tok) if view else None)
        buffer.append(frag)
        if view:
            view.buf_push(frag.vector)
    phase = SEMANTIC if mode == SEMANTICS_ONLY else SYNTACTIC
    return ParserState(tokens=list(sentence.tokens), S=[], M=[], B=buffer,
                       A=[], phase=phase, mode=mode, created_syn={},
                       created_sem={}, created_preds={}, heads={},
                       pred_candidates=pred_candidates, view=view)


def is_terminal(state: ParserState) -> bool:
    """True once the buffer is empty and the live stacks each hold one
    root-headed structure."""
    if state.B:
        return False
    s_done = len(state.S) == 1 and state.S[0].root == ROOT
    m_done = len(state.M) == 1 and state.M[0].root == ROOT
    if state.mode == SYNTAX_ONLY:
        return s_done
    if state.mode == SEMANTICS_ONLY:
        return m_done
    return s_done and m_done
