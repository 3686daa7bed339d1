"""Model parameters, vocabularies, and the binary model file format.

A model file is a magic string, a format version, a JSON header describing
every section (hyperparameters, string tables, tensor names and shapes), and
the raw float64 little-endian tensor payloads in header order.  Saving the
same trained model twice produces identical bytes.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .conll import EmbeddingTable
from .network import StackLSTM
from .structures import (JOINT, KIND_ORDER, M_LEFT, M_PRED, M_REDUCE, M_RIGHT,
                         M_SELF, M_SHIFT, M_SWAP, S_LEFT, S_REDUCE, S_RIGHT,
                         S_SHIFT, SEMANTICS_ONLY, SYNTAX_ONLY, Transition)

UNK = "<unk>"
ROOT_SYM = "<root>"

MAGIC = b"JTPARSE\x00"
FORMAT_VERSION = 1

_PLAIN_KINDS = (S_SHIFT, S_REDUCE, M_SHIFT, M_REDUCE, M_SWAP)
_LABEL_KINDS = (S_RIGHT, S_LEFT)
_ROLE_KINDS = (M_RIGHT, M_LEFT, M_SELF)


@dataclass
class Hyper:
    """Network sizes and training settings."""

    word_dim: int = 32
    pos_dim: int = 12
    label_dim: int = 20
    role_dim: int = 20
    sense_dim: int = 100
    action_dim: int = 100
    pretrained_dim: int = 0
    comp_dim: int = 100
    hidden_dim: int = 100
    layers: int = 2
    state_dim: int = 100
    lr: float = 0.1
    lr_decay: float = 0.1
    dropout: float = 0.2
    epochs: int = 30
    patience: int = 5
    unk_prob: float = 0.5
    decode_cap: int = 100


def _mode_kinds(mode: str):
    if mode == SYNTAX_ONLY:
        return tuple(k for k in KIND_ORDER if k.startswith("S-"))
    if mode == SEMANTICS_ONLY:
        return tuple(k for k in KIND_ORDER if k.startswith("M-"))
    return KIND_ORDER


def action_keys(mode: str, labels, roles, senses) -> list[str]:
    """Every scorable action key, in canonical order."""
    keys = []
    for kind in _mode_kinds(mode):
        if kind in _PLAIN_KINDS:
            keys.append(kind)
        elif kind in _LABEL_KINDS:
            keys.extend(f"{kind}:{l}" for l in labels)
        elif kind in _ROLE_KINDS:
            keys.extend(f"{kind}:{r}" for r in roles)
        elif kind == M_PRED:
            keys.extend(f"{kind}:{s}" for s in senses)
    return keys


@dataclass
class Vocab:
    """String tables shared by the embeddings and the action space."""

    words: list[str]
    pos: list[str]
    labels: list[str]
    roles: list[str]
    senses: list[str]
    lexicon: dict[str, list[str]]
    sense_default: dict[str, str]
    actions: list[str]

    def __post_init__(self):
        self._word_index = {w: i for i, w in enumerate(self.words)}
        self._pos_index = {p: i for i, p in enumerate(self.pos)}
        self._label_index = {l: i for i, l in enumerate(self.labels)}
        self._role_index = {r: i for i, r in enumerate(self.roles)}
        self._sense_index = {s: i for i, s in enumerate(self.senses)}
        self._action_index = {a: i for i, a in enumerate(self.actions)}

    def word_id(self, form: str) -> int:
        return self._word_index.get(form, self._word_index[UNK])

    def pos_id(self, tag: str) -> int:
        return self._pos_index.get(tag, self._pos_index[UNK])

    def label_id(self, label: str) -> int:
        try:
            return self._label_index[label]
        except KeyError:
            raise KeyError(f"unknown dependency label {label!r}") from None

    def role_id(self, role: str) -> int:
        try:
            return self._role_index[role]
        except KeyError:
            raise KeyError(f"unknown semantic role {role!r}") from None

    def sense_id(self, sense: str) -> int:
        return self._sense_index.get(sense, self._sense_index[UNK])

    def action_id(self, t: Transition) -> int:
        key = t.key()
        idx = self._action_index.get(key)
        if idx is None and t.kind == M_PRED:
            idx = self._action_index.get(f"{M_PRED}:{UNK}")
        if idx is None:
            raise KeyError(f"action {key!r} is outside this model's "
                           "action space")
        return idx

    def default_sense(self, lemma: str) -> str:
        return self.sense_default.get(lemma, f"{lemma}.01")

    def candidate_senses(self, lemma: str) -> list[str]:
        return self.lexicon.get(lemma, [])

    def to_dict(self) -> dict:
        return {
            "words": self.words, "pos": self.pos, "labels": self.labels,
            "roles": self.roles, "senses": self.senses,
            "lexicon": self.lexicon, "sense_default": self.sense_default,
            "actions": self.actions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocab":
        return cls(words=list(d["words"]), pos=list(d["pos"]),
                   labels=list(d["labels"]), roles=list(d["roles"]),
                   senses=list(d["senses"]),
                   lexicon={k: list(v) for k, v in d["lexicon"].items()},
                   sense_default=dict(d["sense_default"]),
                   actions=list(d["actions"]))


def build_vocab(sentences, mode: str) -> Vocab:
    """Collect the string tables of a training corpus.

    Syntactic labels are taken as-is, so the corpus should already be
    projectivized when lifted labels are expected in the action space.
    """
    forms, tags = set(), set()
    labels, roles = set(), set()
    sense_counts: Counter = Counter()
    lexicon: dict[str, set] = {}
    want_syn = mode in (JOINT, SYNTAX_ONLY)
    want_sem = mode in (JOINT, SEMANTICS_ONLY)
    for sent in sentences:
        for tok in sent.tokens:
            forms.add(tok.form)
            tags.add(tok.pos)
            if want_sem and tok.is_predicate:
                sense_counts[(tok.lemma, tok.sense)] += 1
                lexicon.setdefault(tok.lemma, set()).add(tok.sense)
        if want_syn:
            labels.update(l for _, _, l in sent.syn_arcs)
        if want_sem:
            roles.update(r for _, _, r in sent.sem_arcs)
    senses = sorted({s for _, s in sense_counts})
    defaults = {}
    for lemma, seen in lexicon.items():
        # most frequent sense wins; ties go to the lexicographically smallest
        ranked = sorted(seen, key=lambda s: (-sense_counts[(lemma, s)], s))
        defaults[lemma] = ranked[0]
    label_list = sorted(labels)
    role_list = sorted(roles)
    sense_list = ([UNK] + senses) if want_sem else []
    return Vocab(
        words=[UNK, ROOT_SYM] + sorted(forms),
        pos=[UNK, ROOT_SYM] + sorted(tags),
        labels=label_list if want_syn else [],
        roles=role_list if want_sem else [],
        senses=sense_list,
        lexicon={k: sorted(v) for k, v in sorted(lexicon.items())},
        sense_default=dict(sorted(defaults.items())),
        actions=action_keys(mode, label_list, role_list, sense_list),
    )


def _glorot(rng, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


class ModelParams:
    """All learned tensors of one parser, plus its vocab and sizes."""

    section_type = "parser"

    def __init__(self, hyper: Hyper, vocab: Vocab, mode: str, rng=None):
        self.hyper = hyper
        self.vocab = vocab
        self.mode = mode
        self.pretrained: EmbeddingTable | None = None
        self._tensors: dict[str, ad.Tensor] = {}
        self._declare(rng)

    # -- structure -----------------------------------------------------------

    @property
    def has_syntax(self) -> bool:
        return self.mode in (JOINT, SYNTAX_ONLY)

    @property
    def has_semantics(self) -> bool:
        return self.mode in (JOINT, SEMANTICS_ONLY)

    def _stacks(self) -> list[str]:
        names = []
        if self.has_syntax:
            names.append("syn")
        if self.has_semantics:
            names.append("sem")
        names.extend(["buf", "act"])
        return names

    def _add(self, name: str, value: np.ndarray):
        self._tensors[name] = ad.parameter(value)

    def _declare(self, rng):
        """Create every tensor, in the order the file format stores them."""
        if rng is None:
            rng = np.random.default_rng(0)
        h, v = self.hyper, self.vocab
        token_in = h.pretrained_dim + h.word_dim + h.pos_dim
        self._add("adapter_W", _glorot(rng, h.comp_dim, token_in))
        self._add("adapter_b", np.zeros(h.comp_dim))
        self._add("word_emb", _glorot(rng, len(v.words), h.word_dim))
        self._add("pos_emb", _glorot(rng, len(v.pos), h.pos_dim))
        if self.has_syntax:
            self._add("label_emb", _glorot(rng, len(v.labels), h.label_dim))
        if self.has_semantics:
            self._add("role_emb", _glorot(rng, len(v.roles), h.role_dim))
            self._add("sense_emb", _glorot(rng, len(v.senses), h.sense_dim))
        self._add("action_emb", _glorot(rng, len(v.actions), h.action_dim))
        if self.has_syntax:
            self._add("syn_comp_W",
                      _glorot(rng, h.comp_dim, 2 * h.comp_dim + h.label_dim))
            self._add("syn_comp_b", np.zeros(h.comp_dim))
        if self.has_semantics:
            self._add("sem_comp_W",
                      _glorot(rng, h.comp_dim, 2 * h.comp_dim + h.role_dim))
            self._add("sem_comp_b", np.zeros(h.comp_dim))
            self._add("pred_comp_W",
                      _glorot(rng, h.comp_dim, h.comp_dim + h.sense_dim))
            self._add("pred_comp_b", np.zeros(h.comp_dim))
        n_stacks = len(self._stacks())
        self._add("state_W", _glorot(rng, h.state_dim,
                                     n_stacks * h.hidden_dim))
        self._add("state_b", np.zeros(h.state_dim))
        self._add("score_W", _glorot(rng, len(v.actions), h.state_dim))
        self._add("score_b", np.zeros(len(v.actions)))
        for stack in self._stacks():
            in_dim = h.action_dim if stack == "act" else h.comp_dim
            for k in range(h.layers):
                layer_in = in_dim if k == 0 else h.hidden_dim
                self._add(f"{stack}_l{k}_Wx",
                          _glorot(rng, 4 * h.hidden_dim, layer_in))
                self._add(f"{stack}_l{k}_Wh",
                          _glorot(rng, 4 * h.hidden_dim, h.hidden_dim))
                self._add(f"{stack}_l{k}_b", np.zeros(4 * h.hidden_dim))
                self._add(f"{stack}_l{k}_h0", np.zeros(h.hidden_dim))
                self._add(f"{stack}_l{k}_c0", np.zeros(h.hidden_dim))

    def tensor(self, name: str) -> ad.Tensor:
        return self._tensors[name]

    def parameters(self) -> list[ad.Tensor]:
        return list(self._tensors.values())

    def make_stack(self, stack: str) -> StackLSTM:
        layers, inits = [], []
        for k in range(self.hyper.layers):
            layers.append((self.tensor(f"{stack}_l{k}_Wx"),
                           self.tensor(f"{stack}_l{k}_Wh"),
                           self.tensor(f"{stack}_l{k}_b")))
            inits.append((self.tensor(f"{stack}_l{k}_h0"),
                          self.tensor(f"{stack}_l{k}_c0")))
        return StackLSTM(layers, inits)

    # -- embeddings ------------------------------------------------------------

    def _token_vector(self, word_idx: int, pos_idx: int,
                      pretrained: np.ndarray | None) -> ad.Tensor:
        parts = []
        if self.hyper.pretrained_dim:
            fixed = pretrained
            if fixed is None:
                fixed = np.zeros(self.hyper.pretrained_dim)
            parts.append(ad.constant(fixed))
        parts.append(ad.embedding_row(self.tensor("word_emb"), word_idx))
        parts.append(ad.embedding_row(self.tensor("pos_emb"), pos_idx))
        return ad.tanh_of(ad.affine(self.tensor("adapter_W"),
                                    ad.concat(parts),
                                    self.tensor("adapter_b")))

    def embed_token(self, form: str, pos: str) -> ad.Tensor:
        fixed = None
        if self.hyper.pretrained_dim and self.pretrained is not None:
            fixed = self.pretrained.lookup(form)
        return self._token_vector(self.vocab.word_id(form),
                                  self.vocab.pos_id(pos), fixed)

    def embed_root(self) -> ad.Tensor:
        return self._token_vector(self.vocab.word_id(ROOT_SYM),
                                  self.vocab.pos_id(ROOT_SYM), None)

    def embed_label(self, label: str) -> ad.Tensor:
        return ad.embedding_row(self.tensor("label_emb"),
                                self.vocab.label_id(label))

    def embed_role(self, role: str) -> ad.Tensor:
        return ad.embedding_row(self.tensor("role_emb"),
                                self.vocab.role_id(role))

    def embed_sense(self, sense: str) -> ad.Tensor:
        return ad.embedding_row(self.tensor("sense_emb"),
                                self.vocab.sense_id(sense))

    def embed_action(self, t: Transition) -> ad.Tensor:
        return ad.embedding_row(self.tensor("action_emb"),
                                self.vocab.action_id(t))

    # -- serialization ---------------------------------------------------------

    def header(self) -> dict:
        return {
            "type": self.section_type,
            "mode": self.mode,
            "hyper": dataclasses.asdict(self.hyper),
            "vocab": self.vocab.to_dict(),
            "tensors": [[name, list(t.value.shape)]
                        for name, t in self._tensors.items()],
        }

    def tensor_items(self):
        return self._tensors.items()

    @classmethod
    def from_serialized(cls, header: dict, arrays: dict) -> "ModelParams":
        hyper = Hyper(**header["hyper"])
        vocab = Vocab.from_dict(header["vocab"])
        obj = cls(hyper, vocab, header["mode"], rng=np.random.default_rng(0))
        for name, value in arrays.items():
            t = obj._tensors.get(name)
            if t is None:
                raise ValueError(f"model file holds unknown tensor {name!r}")
            if t.value.shape != value.shape:
                raise ValueError(f"tensor {name!r} has shape {value.shape}, "
                                 f"expected {t.value.shape}")
            t.value = value
        return obj


def save_model(path, kind: str, sections: list):
    """Write `sections` (ModelParams-like objects) to one model file."""
    headers = [s.header() for s in sections]
    blob = json.dumps({"kind": kind, "sections": headers},
                      sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for section in sections:
            for _, tensor in section.tensor_items():
                fh.write(np.ascontiguousarray(tensor.value,
                                              dtype="<f8").tobytes())


def load_model(path):
    """Read a model file back; returns (kind, [sections])."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a model file")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported model format "
                             f"version {version}")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        sections = []
        for sec in header["sections"]:
            arrays = {}
            for name, shape in sec["tensors"]:
                count = int(np.prod(shape)) if shape else 1
                raw = fh.read(8 * count)
                if len(raw) != 8 * count:
                    raise ValueError(f"{path}: truncated tensor {name!r}")
                arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(
                    shape).astype(np.float64)
            if sec["type"] == "parser":
                sections.append(ModelParams.from_serialized(sec, arrays))
            elif sec["type"] == "pid":
                from .predicates import PidParams
                sections.append(PidParams.from_serialized(sec, arrays))
            else:
                raise ValueError(f"{path}: unknown section type "
                                 f"{sec['type']!r}")
        extra = fh.read(1)
        if extra:
            raise ValueError(f"{path}: trailing bytes after tensor payload")
    return header["kind"], sections
