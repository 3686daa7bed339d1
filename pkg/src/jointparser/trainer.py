"""Greedy training: log loss on each oracle transition, plain SGD.

Sentences are processed one at a time; the per-step losses of a sentence are
summed, backpropagated through every stack operation the run performed, and
applied immediately.  The learning rate decays per epoch and early stopping
watches the dev macro score.
"""

from __future__ import annotations

import dataclasses
import json
from collections import Counter

import numpy as np

from . import autodiff as ad
from .conll import Sentence, evaluate
from .decoder import enumerate_candidates, marked_predicates, parse_corpus
from .model import UNK, Hyper, ModelParams, build_vocab
from .network import NeuralView
from .oracle import projectivize, to_transitions
from .structures import JOINT, SEMANTIC_KINDS, SYNTAX_ONLY, initial_state
from .transitions import apply


def learning_rate(hyper: Hyper, epoch: int) -> float:
    """Epoch learning rate: the base rate shrunk by the decay schedule."""
    return hyper.lr / (1.0 + hyper.lr_decay * epoch)


def unk_singletons(sentences, prob: float, rng) -> list[Sentence]:
    """Replace singleton word forms with the unknown symbol, each with
    probability `prob`, so the model learns useful unknown-word weights."""
    counts: Counter = Counter()
    for sent in sentences:
        counts.update(tok.form for tok in sent.tokens)
    out = []
    for sent in sentences:
        tokens = [
            dataclasses.replace(tok, form=UNK)
            if counts[tok.form] == 1 and rng.random() < prob else tok
            for tok in sent.tokens
        ]
        out.append(Sentence(tokens, set(sent.syn_arcs), set(sent.sem_arcs)))
    return out


def sentence_loss(model: ModelParams, sentence: Sentence, sequence,
                  pred_candidates, rng=None, train: bool = True,
                  loss_kinds=None):
    """Run one oracle sequence; returns (loss, steps scored, steps correct).

    The loss is the summed log loss of the oracle action against the legal
    candidates at each step, or None when no step was scored.  `loss_kinds`
    restricts scoring to a subset of transition kinds; the rest are applied
    without contributing loss.
    """
    view = NeuralView(model, train=train, rng=rng)
    state = initial_state(sentence, model.mode,
                          pred_candidates=pred_candidates, view=view)
    losses = []
    scored = 0
    correct = 0
    for t in sequence:
        if loss_kinds is None or t.kind in loss_kinds:
            cands, ids = enumerate_candidates(state, model.vocab)
            gold_id = model.vocab.action_id(t)
            pos = int(np.searchsorted(ids, gold_id))
            if pos >= len(ids) or ids[pos] != gold_id:
                raise ValueError(f"oracle action {t.key()!r} is not among "
                                 f"the legal candidates")
            y = view.summary()
            scores = view.score(y, ids)
            losses.append(ad.neg_log_softmax(scores, pos))
            scored += 1
            if int(np.argmax(scores.value)) == pos:
                correct += 1
        apply(state, t)
    total = ad.add_many(losses) if losses else None
    return total, scored, correct


def transition_accuracy(model: ModelParams, items, loss_kinds=None) -> float:
    """Teacher-forced share of oracle steps the model scores highest."""
    scored = 0
    correct = 0
    with ad.no_grad():
        for sentence, sequence, candidates in items:
            _, n, c = sentence_loss(model, sentence, sequence, candidates,
                                    train=False, loss_kinds=loss_kinds)
            scored += n
            correct += c
    return correct / scored if scored else 1.0


def sgd_update(model: ModelParams, lr: float):
    for tensor in model.parameters():
        if tensor.grad is not None:
            tensor.value -= lr * tensor.grad
            tensor.grad = None


def prepare_items(sentences, mode: str):
    """Projectivize, extract oracle sequences, and collect predicate sets."""
    items = []
    exact = 0
    for sent in sentences:
        if mode in (JOINT, SYNTAX_ONLY):
            work, _ = projectivize(sent)
        else:
            work = sent
        sequence, ok = to_transitions(work, mode)
        exact += ok
        candidates = None
        if mode != SYNTAX_ONLY:
            candidates = marked_predicates(sent)
        items.append((work, sequence, candidates))
    return items, exact


def _default_dev_parse(dev_sentences, mode: str):
    if mode == SYNTAX_ONLY:
        candidates = None
    else:
        candidates = [marked_predicates(s) for s in dev_sentences]

    def run(model):
        parses, _ = parse_corpus(dev_sentences, model,
                                 candidates_list=candidates)
        return parses
    return run


def train(train_sentences, dev_sentences, hyper: Hyper, mode: str = JOINT,
          seed: int = 1, pretrained=None, log_path=None, loss_kinds=None,
          dev_parse=None):
    """Train one model; returns (model, per-epoch history).

    Early stopping keeps the parameters of the best dev epoch: training ends
    once `hyper.patience` epochs pass without a new best macro score.
    """
    if not train_sentences:
        raise ValueError("empty training corpus")
    rng = np.random.default_rng(seed)
    items, _ = prepare_items(train_sentences, mode)
    vocab = build_vocab([it[0] for it in items], mode)
    hyper = dataclasses.replace(
        hyper, pretrained_dim=pretrained.dim if pretrained else 0)
    model = ModelParams(hyper, vocab, mode, rng=rng)
    model.pretrained = pretrained
    if dev_parse is None:
        dev_parse = _default_dev_parse(dev_sentences, mode)

    history = []
    best_macro = -1.0
    best_snapshot = None
    stale = 0
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(hyper.epochs):
            lr = learning_rate(hyper, epoch)
            if hyper.unk_prob > 0:
                corpus = unk_singletons([it[0] for it in items],
                                        hyper.unk_prob, rng)
            else:
                corpus = [it[0] for it in items]
            order = rng.permutation(len(items))
            loss_sum = 0.0
            step_count = 0
            for i in order:
                _, sequence, candidates = items[i]
                loss, scored, _ = sentence_loss(
                    model, corpus[i], sequence, candidates,
                    rng=rng, train=True, loss_kinds=loss_kinds)
                if loss is None:
                    continue
                ad.backward(loss)
                sgd_update(model, lr)
                loss_sum += loss.item()
                step_count += scored
            metrics = evaluate(dev_sentences, dev_parse(model))
            improved = metrics.macro_f1 > best_macro
            if improved:
                best_macro = metrics.macro_f1
                best_snapshot = {name: t.value.copy()
                                 for name, t in model.tensor_items()}
                stale = 0
            else:
                stale += 1
            record = {
                "epoch": epoch,
                "lr": lr,
                "train_loss": loss_sum / step_count if step_count else 0.0,
                "best": improved,
            }
            record.update(metrics.as_dict())
            history.append(record)
            if log_fh:
                log_fh.write(json.dumps(record, sort_keys=True) + "\n")
                log_fh.flush()
            if stale >= hyper.patience:
                break
    finally:
        if log_fh:
            log_fh.close()
    if best_snapshot is not None:
        for name, tensor in model.tensor_items():
            tensor.value = best_snapshot[name]
            tensor.grad = None
    return model, history


def train_hybrid(train_sentences, dev_sentences, hyper: Hyper, seed: int = 1,
                 pretrained=None, log_path=None):
    """Train the two-pass pipeline; returns (syntax model, semantic model,
    history per stage).

    The first pass is a syntax-only model.  The second is a joint-topology
    model trained only on its semantic decisions, with the syntactic ones
    replayed from the first pass's predictions, so the semantic scorer
    learns to condition on the syntax it will actually see.
    """
    syn_model, syn_history = train(train_sentences, dev_sentences, hyper,
                                   mode=SYNTAX_ONLY, seed=seed,
                                   pretrained=pretrained,
                                   log_path=None)
    predicted, _ = parse_corpus(train_sentences, syn_model)
    stitched = [Sentence(list(gold.tokens), set(pred.syn_arcs),
                         set(gold.sem_arcs))
                for gold, pred in zip(train_sentences, predicted)]
    dev_candidates = [marked_predicates(s) for s in dev_sentences]

    def dev_parse(model):
        parses, _ = parse_corpus(dev_sentences, syn_model, sem_model=model,
                                 candidates_list=dev_candidates)
        return parses

    sem_model, sem_history = train(stitched, dev_sentences, hyper,
                                   mode=JOINT, seed=seed,
                                   pretrained=pretrained, log_path=log_path,
                                   loss_kinds=SEMANTIC_KINDS,
                                   dev_parse=dev_parse)
    return syn_model, sem_model, {"syntax": syn_history,
                                  "semantics": sem_history}
