"""Legality and effect of the eleven joint parsing transitions.

Syntactic actions follow the arc-eager discipline on S while semantic actions
manage M; the two families interleave over a shared buffer.  A transition
that copies the buffer front onto S hands control to the semantic side, and
M-Shift hands it back while consuming the front.  `allowed` enforces every
structural constraint so that `apply` can assume a legal request, and a
handful of extra root-placement rules keep every reachable non-terminal
state live (some transition is always available).
"""

from __future__ import annotations

from .conll import Sentence, Token
from .structures import (
    JOINT, M_LEFT, M_PRED, M_REDUCE, M_RIGHT, M_SELF, M_SHIFT, M_SWAP, ROOT,
    SEMANTIC, SEMANTIC_KINDS, SEMANTICS_ONLY, SYNTACTIC, SYNTACTIC_KINDS,
    SYNTAX_ONLY, S_LEFT, S_REDUCE, S_RIGHT, S_SHIFT, Fragment, ParserState,
    Transition, attach, initial_state, is_terminal, leaf, predicated,
)


class IllegalTransition(ValueError):
    """Raised when a transition violates a structural constraint."""


def _kind_allowed(state: ParserState, kind: str) -> bool:
    S, M, B = state.S, state.M, state.B
    front = B[-1].root if B else None

    if kind == S_SHIFT:
        # Copying the root onto S is the closing move; it must not bury
        # unattached material, so it waits for an empty stack.
        return bool(B) and (front != ROOT or not S)
    if kind == S_REDUCE:
        return bool(S) and S[-1].root in state.heads
    if kind == S_RIGHT:
        return (bool(S) and bool(B) and front != ROOT
                and front not in state.heads)
    if kind == S_LEFT:
        return (bool(S) and bool(B) and S[-1].root != ROOT
                and S[-1].root not in state.heads)
    if kind == M_SHIFT:
        # Same closing discipline as S-Shift: the root may only enter an
        # empty M, which immediately yields the terminal configuration.
        return bool(B) and (front != ROOT or not M)
    if kind == M_REDUCE:
        return bool(M) and M[-1].root != ROOT
    if kind == M_RIGHT:
        return (bool(M) and bool(B) and front != ROOT
                and state.is_candidate(M[-1].root)
                and (M[-1].root, front) not in state.created_sem)
    if kind == M_LEFT:
        return (bool(M) and bool(B) and M[-1].root != ROOT
                and state.is_candidate(front)
                and (front, M[-1].root) not in state.created_sem)
    if kind == M_SWAP:
        if len(M) < 2:
            return False
        pair = frozenset({M[-1].root, M[-2].root})
        return pair != state.last_swapped
    if kind == M_PRED:
        return (bool(B) and state.is_candidate(front)
                and front not in state.created_preds)
    if kind == M_SELF:
        return (bool(B) and state.is_candidate(front)
                and (front, front) not in state.created_sem)
    raise ValueError(f"unknown transition kind {kind!r}")


def allowed(state: ParserState) -> set[str]:
    """The set of transition kinds legal in this configuration."""
    if is_terminal(state):
        raise IllegalTransition("no transitions from a terminal state")
    if state.mode == SYNTAX_ONLY:
        kinds = SYNTACTIC_KINDS
    elif state.mode == SEMANTICS_ONLY:
        kinds = SEMANTIC_KINDS
    else:
        kinds = SYNTACTIC_KINDS if state.phase == SYNTACTIC else SEMANTIC_KINDS
    return {k for k in kinds if _kind_allowed(state, k)}


def _require(state: ParserState, t: Transition):
    if is_terminal(state):
        raise IllegalTransition(f"{t.pretty()}: state is terminal")
    if state.mode == SYNTAX_ONLY:
        ok_family = t.kind in SYNTACTIC_KINDS
    elif state.mode == SEMANTICS_ONLY:
        ok_family = t.kind in SEMANTIC_KINDS
    else:
        family = SYNTACTIC_KINDS if state.phase == SYNTACTIC else SEMANTIC_KINDS
        ok_family = t.kind in family
    if not ok_family:
        raise IllegalTransition(f"{t.pretty()}: wrong family for "
                                f"{state.phase} phase in {state.mode} mode")
    if not _kind_allowed(state, t.kind):
        raise IllegalTransition(f"{t.pretty()}: structural constraint violated "
                                f"(|S|={len(state.S)}, |M|={len(state.M)}, "
                                f"|B|={len(state.B)})")


def apply(state: ParserState, t: Transition) -> ParserState:
    """Execute a legal transition in place and return the same state.

    Identical (configuration, transition) pairs always produce identical
    successors; the action history A records the full parameterized action.
    """
    _require(state, t)
    view = state.view
    kind = t.kind

    if kind == S_SHIFT:
        frag = state.B[-1]
        state.S.append(frag)
        if state.mode == SYNTAX_ONLY:
            state.B.pop()
            if view:
                view.buf_pop()
        if view:
            view.syn_push(frag.vector)
        if state.mode == JOINT:
            state.phase = SEMANTIC

    elif kind == S_REDUCE:
        state.S.pop()
        if view:
            view.syn_pop()

    elif kind == S_RIGHT:
        u = state.S.pop()
        v = state.B[-1]
        vec = view.compose_syn(u.vector, v.vector, t.label) if view else None
        composed = attach(u, v, t.label, "syn", vec)
        state.S.append(composed)
        state.S.append(v)
        state.created_syn[(u.root, v.root)] = t.label
        state.heads[v.root] = u.root
        if state.mode == SYNTAX_ONLY:
            state.B.pop()
            if view:
                view.buf_pop()
        if view:
            view.syn_pop()
            view.syn_push(composed.vector)
            view.syn_push(v.vector)
        if state.mode == JOINT:
            state.phase = SEMANTIC

    elif kind == S_LEFT:
        u = state.S.pop()
        v = state.B[-1]
        vec = view.compose_syn(v.vector, u.vector, t.label) if view else None
        composed = attach(v, u, t.label, "syn", vec)
        state.B[-1] = composed
        state.created_syn[(v.root, u.root)] = t.label
        state.heads[u.root] = v.root
        if view:
            view.syn_pop()
            view.buf_pop()
            view.buf_push(composed.vector)

    elif kind == M_SHIFT:
        frag = state.B.pop()
        state.M.append(frag)
        if view:
            view.buf_pop()
            view.sem_push(frag.vector)
        if state.mode == JOINT:
            state.phase = SYNTACTIC

    elif kind == M_REDUCE:
        state.M.pop()
        if view:
            view.sem_pop()

    elif kind == M_RIGHT:
        u = state.M[-1]
        v = state.B[-1]
        vec = view.compose_sem(u.vector, v.vector, t.role) if view else None
        composed = attach(u, v, t.role, "sem", vec)
        state.M[-1] = composed
        state.created_sem[(u.root, v.root)] = t.role
        if view:
            view.sem_pop()
            view.sem_push(composed.vector)

    elif kind == M_LEFT:
        u = state.M[-1]
        v = state.B[-1]
        vec = view.compose_sem(v.vector, u.vector, t.role) if view else None
        composed = attach(v, u, t.role, "sem", vec)
        state.B[-1] = composed
        state.created_sem[(v.root, u.root)] = t.role
        if view:
            view.buf_pop()
            view.buf_push(composed.vector)

    elif kind == M_SWAP:
        a = state.M.pop()
        b = state.M.pop()
        state.M.append(a)
        state.M.append(b)
        state.last_swapped = frozenset({a.root, b.root})
        if view:
            view.sem_pop()
            view.sem_pop()
            view.sem_push(a.vector)
            view.sem_push(b.vector)

    elif kind == M_PRED:
        v = state.B[-1]
        vec = view.compose_pred(v.vector, t.sense) if view else None
        marked = predicated(v, t.sense, vec)
        state.B[-1] = marked
        state.created_preds[v.root] = t.sense
        if view:
            view.buf_pop()
            view.buf_push(marked.vector)

    elif kind == M_SELF:
        v = state.B[-1]
        vec = view.compose_sem(v.vector, v.vector, t.role) if view else None
        composed = attach(v, v, t.role, "sem", vec)
        state.B[-1] = composed
        state.created_sem[(v.root, v.root)] = t.role
        if view:
            view.buf_pop()
            view.buf_push(composed.vector)

    state.A.append(t)
    if view:
        view.action_push(t)
    return state


def _pred_name(state: ParserState, index: int) -> str:
    return state.created_preds.get(index, state.form_of(index))


def describe_dependency(state: ParserState, t: Transition) -> str:
    """Render the dependency a transition is about to create, or `---`.

    Heads point along the arrow; semantic predicates display as their sense
    once disambiguated.
    """
    if t.kind == S_RIGHT:
        u, v = state.S[-1].root, state.front().root
        return f"{state.form_of(u)} -{t.label}-> {state.form_of(v)}"
    if t.kind == S_LEFT:
        u, v = state.S[-1].root, state.front().root
        return f"{state.form_of(u)} <-{t.label}- {state.form_of(v)}"
    if t.kind == M_RIGHT:
        u, v = state.M[-1].root, state.front().root
        return f"{_pred_name(state, u)} -{t.role}-> {state.form_of(v)}"
    if t.kind == M_LEFT:
        u, v = state.M[-1].root, state.front().root
        return f"{state.form_of(u)} <-{t.role}- {_pred_name(state, v)}"
    if t.kind == M_SELF:
        name = _pred_name(state, state.front().root)
        return f"{name} <-{t.role}-> {name}"
    return "---"


def _stack_text(state: ParserState, frags: list[Fragment]) -> str:
    return "[" + ", ".join(state.form_of(f.root) for f in frags) + "]"


def trace_row(state: ParserState, t: Transition | None = None,
              dependency: str = "---") -> str:
    """One trace line: transition, S, M, B (front first), dependency."""
    name = t.pretty() if t else ""
    return "\t".join([name, _stack_text(state, state.S),
                      _stack_text(state, state.M),
                      _stack_text(state, list(reversed(state.B))),
                      dependency])


def run_sequence(sentence: Sentence, transitions: list[Transition],
                 mode: str = JOINT, pred_candidates: frozenset | None = None,
                 view=None, trace: bool = False):
    """Apply a transition sequence from the initial state.

    Returns (final_state, trace_lines); trace_lines is None unless asked
    for.  Every step is legality-checked, so an unfaithful sequence raises
    IllegalTransition instead of corrupting the state.
    """
    state = initial_state(sentence, mode=mode,
                          pred_candidates=pred_candidates, view=view)
    lines = [trace_row(state)] if trace else None
    for t in transitions:
        dep = describe_dependency(state, t) if trace else "---"
        apply(state, t)
        if trace:
            lines.append(trace_row(state, t, dep))
    return state, lines


def extract_parse(state: ParserState) -> Sentence:
    """Read the created dependencies out of a (normally terminal) state."""
    tokens = []
    for tok in state.tokens:
        sense = state.created_preds.get(tok.index)
        tokens.append(Token(tok.index, tok.form, tok.lemma, tok.pos,
                            sense is not None, sense))
    syn = {(h, d, label) for (h, d), label in state.created_syn.items()}
    sem = {(p, a, role) for (p, a), role in state.created_sem.items()}
    return Sentence(tokens, syn, sem)
