"""Predicate identification for inputs that do not mark predicates.

A bidirectional LSTM reads per-token lemma and POS embeddings and an affine
layer turns each token's two hidden states into a logit; tokens scoring
strictly above 1/2 after the sigmoid are treated as predicates.  The parser
then restricts predicate disambiguation to the identified tokens.  Each
token's decision is independent given the encoder states.
"""

from __future__ import annotations

import dataclasses
import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .conll import Sentence
from .model import UNK, Vocab, _glorot


@dataclass
class PidHyper:
    word_dim: int = 32
    pos_dim: int = 12
    pretrained_dim: int = 0
    hidden_dim: int = 100
    lr: float = 0.1
    lr_decay: float = 0.1
    dropout: float = 0.2
    epochs: int = 30
    patience: int = 5
    unk_prob: float = 0.5


def build_pid_vocab(sentences) -> Vocab:
    lemmas, tags = set(), set()
    for sent in sentences:
        for tok in sent.tokens:
            lemmas.add(tok.lemma)
            tags.add(tok.pos)
    return Vocab(words=[UNK] + sorted(lemmas), pos=[UNK] + sorted(tags),
                 labels=[], roles=[], senses=[], lexicon={},
                 sense_default={}, actions=[])


class PidParams:
    """Learned tensors of the predicate identifier."""

    section_type = "pid"

    def __init__(self, hyper: PidHyper, vocab: Vocab, rng=None):
        self.hyper = hyper
        self.vocab = vocab
        self.pretrained = None
        self._tensors: dict[str, ad.Tensor] = {}
        self._declare(rng)

    def _add(self, name: str, value: np.ndarray):
        self._tensors[name] = ad.parameter(value)

    def _declare(self, rng):
        if rng is None:
            rng = np.random.default_rng(0)
        h, v = self.hyper, self.vocab
        token_in = h.pretrained_dim + h.word_dim + h.pos_dim
        self._add("word_emb", _glorot(rng, len(v.words), h.word_dim))
        self._add("pos_emb", _glorot(rng, len(v.pos), h.pos_dim))
        for direction in ("fwd", "bwd"):
            self._add(f"{direction}_Wx",
                      _glorot(rng, 4 * h.hidden_dim, token_in))
            self._add(f"{direction}_Wh",
                      _glorot(rng, 4 * h.hidden_dim, h.hidden_dim))
            self._add(f"{direction}_b", np.zeros(4 * h.hidden_dim))
            self._add(f"{direction}_h0", np.zeros(h.hidden_dim))
            self._add(f"{direction}_c0", np.zeros(h.hidden_dim))
        self._add("out_w", _glorot(rng, 1, 2 * h.hidden_dim)[0])
        self._add("out_b", np.zeros(()))

    def tensor(self, name: str) -> ad.Tensor:
        return self._tensors[name]

    def parameters(self):
        return list(self._tensors.values())

    def tensor_items(self):
        return self._tensors.items()

    def embed_token(self, lemma: str, pos: str) -> ad.Tensor:
        parts = []
        if self.hyper.pretrained_dim:
            if self.pretrained is not None:
                parts.append(ad.constant(self.pretrained.lookup(lemma)))
            else:
                parts.append(ad.constant(np.zeros(self.hyper.pretrained_dim)))
        parts.append(ad.embedding_row(self.tensor("word_emb"),
                                      self.vocab.word_id(lemma)))
        parts.append(ad.embedding_row(self.tensor("pos_emb"),
                                      self.vocab.pos_id(pos)))
        return ad.concat(parts)

    def header(self) -> dict:
        return {
            "type": self.section_type,
            "hyper": dataclasses.asdict(self.hyper),
            "vocab": self.vocab.to_dict(),
            "tensors": [[name, list(t.value.shape)]
                        for name, t in self._tensors.items()],
        }

    @classmethod
    def from_serialized(cls, header: dict, arrays: dict) -> "PidParams":
        obj = cls(PidHyper(**header["hyper"]),
                  Vocab.from_dict(header["vocab"]))
        for name, value in arrays.items():
            t = obj._tensors.get(name)
            if t is None:
                raise ValueError(f"model file holds unknown tensor {name!r}")
            if t.value.shape != value.shape:
                raise ValueError(f"tensor {name!r} has shape {value.shape}, "
                                 f"expected {t.value.shape}")
            t.value = value
        return obj


def _run_direction(pid: PidParams, inputs, direction: str):
    H = pid.hyper.hidden_dim
    Wx = pid.tensor(f"{direction}_Wx")
    Wh = pid.tensor(f"{direction}_Wh")
    b = pid.tensor(f"{direction}_b")
    h = pid.tensor(f"{direction}_h0")
    c = pid.tensor(f"{direction}_c0")
    states = []
    for x in inputs:
        hc = ad.lstm_cell(x, h, c, Wx, Wh, b)
        h = ad.pick_slice(hc, 0, H)
        c = ad.pick_slice(hc, H, 2 * H)
        states.append(h)
    return states


def token_logits(pid: PidParams, sentence, train: bool = False, rng=None):
    """One scalar logit per token, in token order."""
    keep = 1.0 - pid.hyper.dropout
    use_dropout = train and pid.hyper.dropout > 0
    inputs = []
    for tok in sentence.tokens:
        vec = pid.embed_token(tok.lemma, tok.pos)
        if use_dropout:
            mask = (rng.random(vec.value.shape[0]) < keep) / keep
            vec = ad.mul(vec, ad.constant(mask))
        inputs.append(vec)
    forward = _run_direction(pid, inputs, "fwd")
    backward = _run_direction(pid, list(reversed(inputs)), "bwd")
    backward.reverse()
    w, bias = pid.tensor("out_w"), pid.tensor("out_b")
    return [ad.add(ad.dot(w, ad.concat([f, g])), bias)
            for f, g in zip(forward, backward)]


def identify(pid: PidParams, sentence) -> frozenset:
    """Token indices whose predicate probability is strictly above 1/2."""
    with ad.no_grad():
        logits = token_logits(pid, sentence)
    return frozenset(tok.index for tok, z in zip(sentence.tokens, logits)
                     if float(z.value) > 0.0)


def pid_loss(pid: PidParams, sentence, train: bool = True, rng=None):
    logits = token_logits(pid, sentence, train=train, rng=rng)
    losses = [ad.binary_log_loss(z, 1.0 if tok.is_predicate else 0.0)
              for tok, z in zip(sentence.tokens, logits)]
    return ad.add_many(losses)


def predicate_f1(pid: PidParams, sentences):
    gold, pred = set(), set()
    for sid, sent in enumerate(sentences):
        gold |= {(sid, t.index) for t in sent.tokens if t.is_predicate}
        pred |= {(sid, i) for i in identify(pid, sent)}
    overlap = len(gold & pred)
    precision = overlap / len(pred) if pred else 1.0
    recall = overlap / len(gold) if gold else 1.0
    f1 = 2 * precision * recall / (precision + recall) \
        if precision + recall else 0.0
    return precision, recall, f1


def unk_singleton_lemmas(sentences, prob: float, rng) -> list[Sentence]:
    """The identifier's view of rare words: singleton lemmas become the
    unknown symbol with probability `prob`."""
    counts: Counter = Counter()
    for sent in sentences:
        counts.update(tok.lemma for tok in sent.tokens)
    out = []
    for sent in sentences:
        tokens = [
            dataclasses.replace(tok, lemma=UNK)
            if counts[tok.lemma] == 1 and rng.random() < prob else tok
            for tok in sent.tokens
        ]
        out.append(Sentence(tokens, set(sent.syn_arcs), set(sent.sem_arcs)))
    return out


def train_pid(train_sentences, dev_sentences, hyper: PidHyper, seed: int = 1,
              pretrained=None, log_path=None):
    """Train the identifier; returns (params, per-epoch history)."""
    if not train_sentences:
        raise ValueError("empty training corpus")
    rng = np.random.default_rng(seed)
    vocab = build_pid_vocab(train_sentences)
    hyper = dataclasses.replace(
        hyper, pretrained_dim=pretrained.dim if pretrained else 0)
    pid = PidParams(hyper, vocab, rng=rng)
    pid.pretrained = pretrained

    history = []
    best_f1 = -1.0
    best_snapshot = None
    stale = 0
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(hyper.epochs):
            lr = hyper.lr / (1.0 + hyper.lr_decay * epoch)
            if hyper.unk_prob > 0:
                corpus = unk_singleton_lemmas(train_sentences,
                                              hyper.unk_prob, rng)
            else:
                corpus = list(train_sentences)
            order = rng.permutation(len(corpus))
            loss_sum = 0.0
            token_count = 0
            for i in order:
                loss = pid_loss(pid, corpus[i], train=True, rng=rng)
                ad.backward(loss)
                for tensor in pid.parameters():
                    if tensor.grad is not None:
                        tensor.value -= lr * tensor.grad
                        tensor.grad = None
                loss_sum += loss.item()
                token_count += len(corpus[i].tokens)
            precision, recall, f1 = predicate_f1(pid, dev_sentences)
            improved = f1 > best_f1
            if improved:
                best_f1 = f1
                best_snapshot = {name: t.value.copy()
                                 for name, t in pid.tensor_items()}
                stale = 0
            else:
                stale += 1
            record = {"epoch": epoch, "lr": lr,
                      "train_loss": loss_sum / token_count if token_count
                      else 0.0,
                      "precision": precision, "recall": recall, "f1": f1,
                      "best": improved}
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
        for name, tensor in pid.tensor_items():
            tensor.value = best_snapshot[name]
            tensor.grad = None
    return pid, history
