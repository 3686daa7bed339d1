"""Greedy decoding: score the legal transitions, take the best, repeat.

Each sentence costs a linear number of transitions, and every step scores
only the actions that are legal in the current configuration.  Ties go to
the action with the smallest id in the action table, which makes decoding
deterministic.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import autodiff as ad
from .conll import Sentence
from .model import ModelParams, Vocab
from .network import NeuralView
from .oracle import SyntaxGuide, deprojectivize, projectivize
from .structures import (KIND_ORDER, M_LEFT, M_PRED, M_RIGHT, M_SELF, ROOT,
                         S_LEFT, S_RIGHT, SYNTACTIC, Transition,
                         initial_state, is_terminal)
from .transitions import allowed, apply, describe_dependency, extract_parse, trace_row


class DecodeError(RuntimeError):
    pass


def enumerate_candidates(state, vocab: Vocab):
    """All legal transitions with their action ids, sorted by id.

    Parameterized kinds expand over the model's label and role tables.  A
    predicate disambiguation offers the senses the lexicon knows for the
    front lemma, or a single catch-all action carrying the default sense
    when the lemma was never seen as a predicate.
    """
    kinds = allowed(state)
    pairs = []
    for kind in KIND_ORDER:
        if kind not in kinds:
            continue
        if kind in (S_RIGHT, S_LEFT):
            for label in vocab.labels:
                t = Transition(kind, label=label)
                pairs.append((vocab.action_id(t), t))
        elif kind in (M_RIGHT, M_LEFT, M_SELF):
            for role in vocab.roles:
                t = Transition(kind, role=role)
                pairs.append((vocab.action_id(t), t))
        elif kind == M_PRED:
            lemma = state.tokens[state.front().root - 1].lemma
            senses = vocab.candidate_senses(lemma)
            if senses:
                for sense in senses:
                    t = Transition(kind, sense=sense)
                    pairs.append((vocab.action_id(t), t))
            else:
                t = Transition(kind, sense=vocab.default_sense(lemma))
                pairs.append((vocab.action_id(t), t))
        else:
            t = Transition(kind)
            pairs.append((vocab.action_id(t), t))
    if not pairs:
        raise DecodeError("no legal transition in a non-terminal state")
    pairs.sort(key=lambda item: item[0])
    ids = np.array([i for i, _ in pairs], dtype=np.int64)
    return [t for _, t in pairs], ids


def _fill_missing_senses(state, vocab: Vocab, pred_candidates):
    """Give every predicate the decoder never disambiguated a fallback sense.

    Covers the marked candidates and any token that sourced a semantic arc,
    so the output never contains an arc from an unmarked predicate.
    """
    targets = set(pred_candidates or ())
    targets.update(p for p, _ in state.created_sem)
    for idx in sorted(targets):
        if idx not in state.created_preds:
            lemma = state.tokens[idx - 1].lemma
            state.created_preds[idx] = vocab.default_sense(lemma)


def parse_sentence(sentence: Sentence, model: ModelParams,
                   pred_candidates: frozenset | None = None,
                   trace: bool = False, guide: SyntaxGuide | None = None):
    """Greedily parse one sentence; returns (parse, trace_lines).

    `pred_candidates` restricts predicate disambiguation to the given token
    indices, as the shared-task inputs require.  `guide`, when present,
    dictates every syntactic-phase transition and leaves only the semantic
    steps to the model.
    """
    with ad.no_grad():
        view = NeuralView(model, train=False)
        state = initial_state(sentence, model.mode,
                              pred_candidates=pred_candidates, view=view)
        lines = [trace_row(state)] if trace else None
        budget = model.hyper.decode_cap * (len(sentence.tokens) + 1) + 8
        steps = 0
        while not is_terminal(state):
            steps += 1
            if steps > budget:
                raise DecodeError(
                    f"decode exceeded {budget} transitions; "
                    f"|S|={len(state.S)} |M|={len(state.M)} "
                    f"|B|={len(state.B)} phase={state.phase} "
                    f"history tail={[t.key() for t in state.A[-6:]]}")
            if guide is not None and state.phase == SYNTACTIC:
                t = guide.choose(state)
            else:
                cands, ids = enumerate_candidates(state, model.vocab)
                y = view.summary()
                scores = view.score(y, ids)
                t = cands[int(np.argmax(scores.value))]
            dep = describe_dependency(state, t) if trace else "---"
            apply(state, t)
            if trace:
                lines.append(trace_row(state, t, dep))
        if model.has_semantics:
            _fill_missing_senses(state, model.vocab, pred_candidates)
        parsed = extract_parse(state)
    if model.has_syntax:
        parsed = deprojectivize(parsed)
    return parsed, lines


def parse_hybrid(sentence: Sentence, syn_model: ModelParams,
                 sem_model: ModelParams,
                 pred_candidates: frozenset | None = None,
                 trace: bool = False):
    """Two-pass parse: predict the tree, then the semantics on top of it."""
    tree, _ = parse_sentence(sentence, syn_model)
    scaffold = Sentence(list(sentence.tokens), set(tree.syn_arcs), set())
    projective, _ = projectivize(scaffold)
    guide = SyntaxGuide(projective)
    return parse_sentence(sentence, sem_model,
                          pred_candidates=pred_candidates,
                          trace=trace, guide=guide)


def marked_predicates(sentence: Sentence) -> frozenset:
    return frozenset(t.index for t in sentence.tokens if t.is_predicate)


def parse_corpus(sentences, model: ModelParams,
                 sem_model: ModelParams | None = None,
                 candidates_list=None, threads: int = 1,
                 trace: bool = False):
    """Parse a list of sentences, optionally across worker threads.

    Returns (parses, trace_lines_per_sentence).  Results are in input order
    and independent of the thread count.
    """
    if candidates_list is None:
        candidates_list = [None] * len(sentences)

    def work(i: int):
        if sem_model is not None:
            return parse_hybrid(sentences[i], model, sem_model,
                                pred_candidates=candidates_list[i],
                                trace=trace)
        return parse_sentence(sentences[i], model,
                              pred_candidates=candidates_list[i],
                              trace=trace)

    if threads > 1 and len(sentences) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(len(sentences))))
    else:
        results = [work(i) for i in range(len(sentences))]
    parses = [r[0] for r in results]
    traces = [r[1] for r in results] if trace else None
    return parses, traces
