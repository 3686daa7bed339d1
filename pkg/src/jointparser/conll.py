"""Reading and writing CoNLL 2008/2009 column files, embedding tables, and scoring.

Column layouts differ between the two shared-task formats; everything behind
`read_conll`/`write_conll` works with the same `Sentence` objects regardless of
which format produced them.  Where a format carries both gold and predicted
lemma/POS columns, the predicted columns are the ones consumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FORMATS = ("2008", "2009")


class ConllError(ValueError):
    """Raised for malformed corpus files; message carries the line number."""


@dataclass
class Token:
    """One input word with its lexical attributes and predicate marking."""

    index: int
    form: str
    lemma: str
    pos: str
    is_predicate: bool = False
    sense: str | None = None

    def __post_init__(self):
        if self.is_predicate and not self.sense:
            raise ValueError(f"token {self.index}: predicate without a sense")
        if not self.is_predicate and self.sense is not None:
            raise ValueError(f"token {self.index}: sense on a non-predicate")


@dataclass
class Sentence:
    """Tokens plus the syntactic tree and the semantic dependency graph.

    Arc tuples are (head, dependent, label) with token indices starting at 1;
    head 0 is the root symbol.  Semantic arcs run from predicate to argument
    and may be self-arcs.
    """

    tokens: list[Token]
    syn_arcs: set[tuple[int, int, str]] = field(default_factory=set)
    sem_arcs: set[tuple[int, int, str]] = field(default_factory=set)

    def __len__(self):
        return len(self.tokens)

    def head_of(self, index: int) -> tuple[int, str] | None:
        for h, d, l in self.syn_arcs:
            if d == index:
                return h, l
        return None

    def predicates(self) -> list[Token]:
        return [t for t in self.tokens if t.is_predicate]

    def validate(self):
        """Check the tree and graph invariants, raising ValueError on breakage."""
        n = len(self.tokens)
        if n == 0:
            raise ValueError("empty sentence")
        heads: dict[int, int] = {}
        for h, d, _ in self.syn_arcs:
            if not (0 <= h <= n) or not (1 <= d <= n):
                raise ValueError(f"arc ({h},{d}) out of range for {n} tokens")
            if d in heads:
                raise ValueError(f"token {d} has multiple heads")
            heads[d] = h
        if heads:
            if set(heads) != set(range(1, n + 1)):
                raise ValueError("syntactic arcs do not cover every token")
            for start in range(1, n + 1):
                seen = set()
                node = start
                while node != 0:
                    if node in seen:
                        raise ValueError(f"cycle through token {start}")
                    seen.add(node)
                    node = heads[node]
        pred_set = {t.index for t in self.tokens if t.is_predicate}
        pairs = set()
        for p, a, _ in self.sem_arcs:
            if p not in pred_set:
                raise ValueError(f"semantic arc from unmarked predicate {p}")
            if not (1 <= a <= n):
                raise ValueError(f"semantic argument {a} out of range")
            if (p, a) in pairs:
                raise ValueError(f"duplicate semantic dependency ({p},{a})")
            pairs.add((p, a))


def _columns_2009(token: Token, head: int, label: str, fillpred: str,
                  pred: str, apreds: list[str]) -> list[str]:
    h = str(head) if head >= 0 else "_"
    return [str(token.index), token.form, token.lemma, token.lemma,
            token.pos, token.pos, "_", "_", h, h, label, label,
            fillpred, pred] + apreds


def _columns_2008(token: Token, head: int, label: str,
                  pred: str, apreds: list[str]) -> list[str]:
    h = str(head) if head >= 0 else "_"
    return [str(token.index), token.form, token.lemma, token.pos, token.pos,
            token.form, token.lemma, token.pos, h, label, pred] + apreds


def render_conll(sentences: list[Sentence], fmt: str = "2009") -> str:
    """Format sentences as tab-separated blocks separated by blank lines."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    lines = []
    for sent in sentences:
        heads = {d: (h, l) for h, d, l in sent.syn_arcs}
        preds = sent.predicates()
        order = {t.index: k for k, t in enumerate(preds)}
        roles = {(order[p], a): r for p, a, r in sent.sem_arcs}
        for tok in sent.tokens:
            head, label = heads.get(tok.index, (-1, "_"))
            apreds = [roles.get((k, tok.index), "_") for k in range(len(preds))]
            pred = tok.sense if tok.is_predicate else "_"
            if fmt == "2009":
                fill = "Y" if tok.is_predicate else "_"
                cols = _columns_2009(tok, head, label, fill, pred, apreds)
            else:
                cols = _columns_2008(tok, head, label, pred, apreds)
            lines.append("\t".join(cols))
        lines.append("")
    return "\n".join(lines)


def write_conll(sentences: list[Sentence], path: str, fmt: str = "2009"):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_conll(sentences, fmt))


def _pick(cols: list[str], first: int, fallback: int) -> str:
    value = cols[first]
    return value if value != "_" else cols[fallback]


def _parse_block(rows: list[tuple[int, list[str]]], fmt: str) -> Sentence:
    tokens = []
    heads = []
    apred_rows = []
    min_cols = 14 if fmt == "2009" else 11
    for lineno, cols in rows:
        if len(cols) < min_cols:
            raise ConllError(f"line {lineno}: expected at least {min_cols} "
                             f"columns, found {len(cols)}")
        try:
            idx = int(cols[0])
        except ValueError:
            raise ConllError(f"line {lineno}: bad token id {cols[0]!r}") from None
        if idx != len(tokens) + 1:
            raise ConllError(f"line {lineno}: token id {idx} out of sequence")
        if fmt == "2009":
            form, lemma, pos = cols[1], _pick(cols, 3, 2), _pick(cols, 5, 4)
            head_cell, label = cols[8], cols[10]
            is_pred = cols[12] == "Y"
            sense = cols[13] if is_pred else None
            if is_pred and sense == "_":
                raise ConllError(f"line {lineno}: predicate without a sense")
            apreds = cols[14:]
        else:
            form, lemma, pos = cols[1], _pick(cols, 6, 2), _pick(cols, 4, 3)
            head_cell, label = cols[8], cols[9]
            is_pred = cols[10] != "_"
            sense = cols[10] if is_pred else None
            apreds = cols[11:]
        if head_cell == "_":
            head = None
        else:
            try:
                head = int(head_cell)
            except ValueError:
                raise ConllError(f"line {lineno}: bad head {head_cell!r}") from None
        tokens.append(Token(idx, form, lemma, pos, is_pred, sense))
        heads.append((lineno, head, label))
        apred_rows.append(apreds)

    n = len(tokens)
    syn_arcs = set()
    for tok, (lineno, head, label) in zip(tokens, heads):
        if head is None:
            continue
        if not (0 <= head <= n):
            raise ConllError(f"line {lineno}: head {head} out of range")
        syn_arcs.add((head, tok.index, label))

    pred_indices = [t.index for t in tokens if t.is_predicate]
    sem_arcs = set()
    for tok, apreds, (lineno, _, _) in zip(tokens, apred_rows, heads):
        for k, cell in enumerate(apreds):
            if cell == "_":
                continue
            if k >= len(pred_indices):
                raise ConllError(f"line {lineno}: role in column for "
                                 f"nonexistent predicate {k + 1}")
            sem_arcs.add((pred_indices[k], tok.index, cell))

    sent = Sentence(tokens, syn_arcs, sem_arcs)
    try:
        sent.validate()
    except ValueError as exc:
        first = rows[0][0]
        raise ConllError(f"block at line {first}: {exc}") from None
    return sent


def read_conll(path: str, fmt: str = "2009") -> list[Sentence]:
    """Read a corpus file, validating ids, heads, and tree structure."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    sentences = []
    rows: list[tuple[int, list[str]]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                if rows:
                    sentences.append(_parse_block(rows, fmt))
                    rows = []
                continue
            rows.append((lineno, line.split("\t")))
    if rows:
        sentences.append(_parse_block(rows, fmt))
    return sentences


class EmbeddingTable:
    """Fixed pretrained word vectors with a deterministic fallback for OOV."""

    def __init__(self, vectors: dict[str, np.ndarray], dim: int, seed: int = 1):
        self.vectors = vectors
        self.dim = dim
        rng = np.random.default_rng(seed)
        self.oov_vector = rng.uniform(-0.1, 0.1, size=dim)

    def lookup(self, word: str) -> np.ndarray:
        hit = self.vectors.get(word)
        if hit is None:
            return self.oov_vector
        return hit

    def __contains__(self, word):
        return word in self.vectors

    def __len__(self):
        return len(self.vectors)


def load_embeddings(path: str, seed: int = 1) -> EmbeddingTable:
    """Load whitespace-separated `word v1 .. vd` lines into a lookup table."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ValueError(f"line {lineno}: no vector components")
            word = parts[0]
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError:
                raise ValueError(f"line {lineno}: non-numeric component") from None
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise ValueError(f"line {lineno}: expected {dim} components, "
                                 f"found {vec.shape[0]}")
            vectors[word] = vec
    if dim is None:
        raise ValueError(f"{path}: empty embeddings file")
    return EmbeddingTable(vectors, dim, seed=seed)


@dataclass
class Metrics:
    """Corpus-level scores: labeled attachment plus pooled semantic P/R/F1."""

    las: float
    sem_precision: float
    sem_recall: float
    sem_f1: float
    macro_f1: float

    def as_dict(self) -> dict[str, float]:
        return {"las": self.las, "sem_precision": self.sem_precision,
                "sem_recall": self.sem_recall, "sem_f1": self.sem_f1,
                "macro_f1": self.macro_f1}


def _sem_items(sent: Sentence, sid: int) -> set[tuple]:
    items = {(sid, "arc", p, a, r) for p, a, r in sent.sem_arcs}
    for tok in sent.tokens:
        if tok.is_predicate:
            items.add((sid, "sense", tok.index, tok.sense))
    return items


def evaluate(gold: list[Sentence], predicted: list[Sentence]) -> Metrics:
    """Score predictions against gold: LAS, pooled semantic F1, and their mean.

    Semantic precision/recall pool argument arcs and predicate senses into a
    single item set, so a missed sense and a missed arc cost the same.
    """
    if len(gold) != len(predicted):
        raise ValueError(f"sentence count mismatch: {len(gold)} gold vs "
                         f"{len(predicted)} predicted")
    total_tokens = 0
    correct_heads = 0
    gold_items: set[tuple] = set()
    pred_items: set[tuple] = set()
    for sid, (g, p) in enumerate(zip(gold, predicted)):
        if len(g) != len(p):
            raise ValueError(f"sentence {sid}: token count mismatch")
        total_tokens += len(g)
        gold_heads = {d: (h, l) for h, d, l in g.syn_arcs}
        pred_heads = {d: (h, l) for h, d, l in p.syn_arcs}
        for d, attachment in gold_heads.items():
            if pred_heads.get(d) == attachment:
                correct_heads += 1
        gold_items |= _sem_items(g, sid)
        pred_items |= _sem_items(p, sid)

    las = correct_heads / total_tokens if total_tokens else 1.0
    overlap = len(gold_items & pred_items)
    precision = overlap / len(pred_items) if pred_items else 1.0
    recall = overlap / len(gold_items) if gold_items else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(las, precision, recall, f1, (las + f1) / 2.0)
