"""Gold-parse handling: pseudo-projective lifting and transition extraction.

`to_transitions` walks the transition system over a gold parse, choosing at
every step the highest-priority legal transition consistent with the gold
annotations.  Crossing semantic structure that a single swap cannot reach is
abandoned, and the returned flag reports whether replaying the sequence
reproduces the gold parse exactly.
"""

from __future__ import annotations

from .conll import Sentence, Token
from .structures import (
    JOINT, M_LEFT, M_PRED, M_REDUCE, M_RIGHT, M_SELF, M_SHIFT, M_SWAP, ROOT,
    SEMANTIC, SEMANTICS_ONLY, SYNTACTIC, SYNTAX_ONLY, S_LEFT, S_REDUCE,
    S_RIGHT, S_SHIFT, ParserState, Transition, initial_state, is_terminal,
)
from .transitions import apply, extract_parse

AUGMENT_SEP = "|"


def _subtree(children: dict[int, list[int]], node: int) -> set[int]:
    out = set()
    stack = [node]
    while stack:
        cur = stack.pop()
        out.add(cur)
        stack.extend(children.get(cur, ()))
    return out


def _children_map(heads: dict[int, int]) -> dict[int, list[int]]:
    children: dict[int, list[int]] = {}
    for d in sorted(heads):
        children.setdefault(heads[d], []).append(d)
    return children


def _nonprojective_arcs(heads: dict[int, int]) -> list[tuple[int, int]]:
    """Arcs (span, dependent) whose span covers a token outside the head's
    subtree.  Arcs from the root symbol are never reported."""
    children = _children_map(heads)
    bad = []
    for d, h in heads.items():
        if h == ROOT:
            continue
        lo, hi = min(h, d), max(h, d)
        if hi - lo < 2:
            continue
        inside = _subtree(children, h)
        if any(w not in inside for w in range(lo + 1, hi)):
            bad.append((hi - lo, d))
    return sorted(bad)


def is_projective(sentence: Sentence) -> bool:
    heads = {d: h for h, d, _ in sentence.syn_arcs}
    return not _nonprojective_arcs(heads)


def base_label(label: str) -> str:
    return label.partition(AUGMENT_SEP)[0]


def projectivize(sentence: Sentence) -> tuple[Sentence, list[tuple]]:
    """Lift non-projective arcs to the original head's head until the tree
    is projective, augmenting each lifted label with that head's label.

    Returns the rewritten sentence and a list of lift records
    (dependent, old_head, new_head, old_label, new_label).  A projective
    input comes back unchanged with an empty trace.
    """
    heads = {d: h for h, d, _ in sentence.syn_arcs}
    labels = {d: l for _, d, l in sentence.syn_arcs}
    lifts = []
    while True:
        bad = _nonprojective_arcs(heads)
        if not bad:
            break
        _, d = bad[0]
        h = heads[d]
        g = heads[h]
        old_label = labels[d]
        if AUGMENT_SEP not in old_label:
            labels[d] = old_label + AUGMENT_SEP + base_label(labels[h])
        heads[d] = g
        lifts.append((d, h, g, old_label, labels[d]))
    if not lifts:
        return sentence, []
    arcs = {(heads[d], d, labels[d]) for d in heads}
    return Sentence(list(sentence.tokens), arcs, set(sentence.sem_arcs)), lifts


def _find_lowering_target(heads: dict[int, int], labels: dict[int, str],
                          start: int, dependent: int, want: str) -> int | None:
    """Breadth-first, left-to-right search below `start` for a node whose
    base label matches, skipping the dependent's own subtree."""
    children = _children_map(heads)
    forbidden = _subtree(children, dependent)
    queue = [c for c in children.get(start, []) if c not in forbidden]
    while queue:
        nxt = []
        for node in queue:
            if base_label(labels[node]) == want:
                return node
            nxt.extend(c for c in children.get(node, []) if c not in forbidden)
        queue = nxt
    return None


def deprojectivize(sentence: Sentence) -> Sentence:
    """Lower every augmented arc back toward the label it encodes.

    Arcs whose encoded head label cannot be found anywhere below the current
    head keep their attachment and merely lose the augmentation.
    """
    heads = {d: h for h, d, _ in sentence.syn_arcs}
    labels = {d: l for _, d, l in sentence.syn_arcs}
    pending = sorted(d for d in labels if AUGMENT_SEP in labels[d])
    while pending:
        progressed = False
        for d in list(pending):
            base, _, want = labels[d].partition(AUGMENT_SEP)
            target = _find_lowering_target(heads, labels, heads[d], d, want)
            if target is not None:
                heads[d] = target
                labels[d] = base
                pending.remove(d)
                progressed = True
        if not progressed:
            for d in pending:
                labels[d] = base_label(labels[d])
            break
    arcs = {(heads[d], d, labels[d]) for d in heads}
    return Sentence(list(sentence.tokens), arcs, set(sentence.sem_arcs))


class _Gold:
    """Indexed gold annotations for fast oracle decisions."""

    def __init__(self, sentence: Sentence):
        self.heads: dict[int, int] = {}
        self.labels: dict[int, str] = {}
        for h, d, l in sentence.syn_arcs:
            self.heads[d] = h
            self.labels[d] = l
        self.sem: dict[tuple[int, int], str] = {
            (p, a): r for p, a, r in sentence.sem_arcs}
        self.senses: dict[int, str] = {
            t.index: t.sense for t in sentence.tokens if t.is_predicate}
        self.rightmost_dep: dict[int, int] = {}
        for d, h in self.heads.items():
            if d > self.rightmost_dep.get(h, 0):
                self.rightmost_dep[h] = d
        self.partners: dict[int, list[int]] = {}
        for p, a in self.sem:
            self.partners.setdefault(p, []).append(a)
            if a != p:
                self.partners.setdefault(a, []).append(p)


def _front_position(state: ParserState) -> int:
    front = state.front().root
    return len(state.tokens) + 1 if front == ROOT else front


def _alive(state: ParserState, gold: _Gold, token: int) -> bool:
    """Does this token still have an uncreated semantic arc with anything
    left in the buffer?"""
    front_pos = _front_position(state)
    limit = len(state.tokens)
    for other in gold.partners.get(token, ()):
        if not (front_pos <= other <= limit):
            continue
        for pair in ((token, other), (other, token)):
            if pair in gold.sem and pair not in state.created_sem:
                return True
    return False


def _choose_syntactic(state: ParserState, gold: _Gold) -> Transition:
    front = state.front().root
    if state.S:
        top = state.S[-1].root
        if top != ROOT and top not in state.heads and gold.heads.get(top) == front:
            return Transition(S_LEFT, label=gold.labels[top])
        if front != ROOT and front not in state.heads and \
                gold.heads.get(front) == (top if top != ROOT else None):
            return Transition(S_RIGHT, label=gold.labels[front])
        if top in state.heads and \
                gold.rightmost_dep.get(top, 0) < _front_position(state):
            return Transition(S_REDUCE)
    if front != ROOT or not state.S:
        return Transition(S_SHIFT)
    # Root at the front over a non-empty stack: drain it.  A headless top
    # whose gold head is gone can only attach here, making the run inexact.
    top = state.S[-1].root
    if top in state.heads:
        return Transition(S_REDUCE)
    return Transition(S_LEFT, label=gold.labels.get(top, "dep"))


def _choose_semantic(state: ParserState, gold: _Gold) -> Transition:
    front = state.front().root
    if front != ROOT:
        if front in gold.senses and front not in state.created_preds:
            return Transition(M_PRED, sense=gold.senses[front])
        self_pair = (front, front)
        if self_pair in gold.sem and self_pair not in state.created_sem:
            return Transition(M_SELF, role=gold.sem[self_pair])
        if state.M:
            top = state.M[-1].root
            left = (front, top)
            if left in gold.sem and left not in state.created_sem:
                return Transition(M_LEFT, role=gold.sem[left])
            right = (top, front)
            if right in gold.sem and right not in state.created_sem:
                return Transition(M_RIGHT, role=gold.sem[right])
        if len(state.M) >= 2:
            top, second = state.M[-1].root, state.M[-2].root
            needed_now = any(
                pair in gold.sem and pair not in state.created_sem
                for pair in ((front, second), (second, front)))
            if needed_now and _alive(state, gold, top) and \
                    frozenset({top, second}) != state.last_swapped:
                return Transition(M_SWAP)
    if state.M and state.M[-1].root != ROOT and \
            not _alive(state, gold, state.M[-1].root):
        return Transition(M_REDUCE)
    if state.B and (front != ROOT or not state.M):
        return Transition(M_SHIFT)
    return Transition(M_REDUCE)


class SyntaxGuide:
    """Forces the syntactic half of a run to follow one fixed tree.

    The tree must be projective.  During a guided run the semantic steps stay
    free while every syntactic decision comes from here.
    """

    def __init__(self, sentence: Sentence):
        self._gold = _Gold(sentence)

    def choose(self, state: ParserState) -> Transition:
        return _choose_syntactic(state, self._gold)


def to_transitions(sentence: Sentence,
                   mode: str = JOINT) -> tuple[list[Transition], bool]:
    """Extract the oracle transition sequence for a gold parse.

    The syntax must already be projectivized.  The second return value is
    True when replaying the sequence reconstructs the gold annotations of
    every layer the mode covers.
    """
    gold = _Gold(sentence)
    candidates = frozenset(gold.senses)
    state = initial_state(sentence, mode=mode, pred_candidates=candidates)
    sequence: list[Transition] = []
    while not is_terminal(state):
        if state.mode == SYNTAX_ONLY:
            t = _choose_syntactic(state, gold)
        elif state.mode == SEMANTICS_ONLY:
            t = _choose_semantic(state, gold)
        elif state.phase == SYNTACTIC:
            t = _choose_syntactic(state, gold)
        else:
            t = _choose_semantic(state, gold)
        apply(state, t)
        sequence.append(t)
    recovered = extract_parse(state)
    exact = True
    if mode in (JOINT, SYNTAX_ONLY):
        exact &= recovered.syn_arcs == sentence.syn_arcs
    if mode in (JOINT, SEMANTICS_ONLY):
        exact &= recovered.sem_arcs == sentence.sem_arcs
        exact &= {t.index: t.sense for t in recovered.tokens if t.is_predicate} \
            == gold.senses
    return sequence, exact
