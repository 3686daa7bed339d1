"""Stack LSTMs, composition functions, and the per-sentence neural view.

A StackLSTM keeps its whole push history as a tree of entries, each pointing
at its parent, so popping is just moving the stack pointer back.  A later
push after a pop branches the history instead of rewriting it, which is what
lets gradients flow through every configuration the parser visited.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .structures import Transition


class StackLSTM:
    """A multi-layer LSTM whose read pointer can rewind to any prefix."""

    def __init__(self, layers, init_states):
        # layers: list of (Wx, Wh, b) per layer; init_states: list of (h0, c0)
        self._layers = layers
        self._hidden = init_states[0][0].value.shape[0]
        self._entries = [(-1, list(init_states))]
        self._ptr = 0
        self._depth = [0]

    def push(self, x: ad.Tensor):
        states = self._entries[self._ptr][1]
        new_states = []
        inp = x
        H = self._hidden
        for (Wx, Wh, b), (h_prev, c_prev) in zip(self._layers, states):
            hc = ad.lstm_cell(inp, h_prev, c_prev, Wx, Wh, b)
            h = ad.pick_slice(hc, 0, H)
            c = ad.pick_slice(hc, H, 2 * H)
            new_states.append((h, c))
            inp = h
        self._entries.append((self._ptr, new_states))
        self._depth.append(self._depth[self._ptr] + 1)
        self._ptr = len(self._entries) - 1

    def pop(self):
        if self._ptr == 0:
            raise IndexError("pop from an empty stack encoder")
        self._ptr = self._entries[self._ptr][0]

    def query(self) -> ad.Tensor:
        """Hidden state of the top layer at the current stack top."""
        return self._entries[self._ptr][1][-1][0]

    def __len__(self):
        return self._depth[self._ptr]


def compose_arc(Z: ad.Tensor, e: ad.Tensor, head_vec: ad.Tensor,
                dep_vec: ad.Tensor, rel_vec: ad.Tensor) -> ad.Tensor:
    """tanh(Z [head; dep; relation] + e), the composed fragment vector."""
    return ad.tanh_of(ad.affine(Z, ad.concat([head_vec, dep_vec, rel_vec]), e))


def compose_predicate(Z: ad.Tensor, e: ad.Tensor, word_vec: ad.Tensor,
                      sense_vec: ad.Tensor) -> ad.Tensor:
    """tanh(Z [word; sense] + e), a word rewritten as a predicate."""
    return ad.tanh_of(ad.affine(Z, ad.concat([word_vec, sense_vec]), e))


class NeuralView:
    """Mirrors one parser run in the stack encoders of a model.

    ParserState calls the hooks here as transitions fire; the view keeps the
    four sequence encoders aligned with S, M, B, and the action history, and
    produces the concatenated summary that scores the next transition.
    """

    def __init__(self, model, train: bool = False, rng=None):
        self.model = model
        hyper = model.hyper
        self._keep = 1.0 - hyper.dropout
        self._train = bool(train) and hyper.dropout > 0.0
        if self._train and rng is None:
            raise ValueError("training-time dropout needs an rng")
        self._rng = rng
        self.syn = model.make_stack("syn") if model.has_syntax else None
        self.sem = model.make_stack("sem") if model.has_semantics else None
        self.buf = model.make_stack("buf")
        self.act = model.make_stack("act")

    def _drop(self, vec: ad.Tensor) -> ad.Tensor:
        if not self._train:
            return vec
        mask = (self._rng.random(vec.value.shape[0]) < self._keep) / self._keep
        return ad.mul(vec, ad.constant(mask))

    # -- token embeddings ---------------------------------------------------

    def atomic(self, token) -> ad.Tensor:
        return self.model.embed_token(token.form, token.pos)

    def root_atomic(self) -> ad.Tensor:
        return self.model.embed_root()

    # -- stack hooks called by the transition system ------------------------

    def buf_push(self, vec):
        self.buf.push(self._drop(vec))

    def buf_pop(self):
        self.buf.pop()

    def syn_push(self, vec):
        self.syn.push(self._drop(vec))

    def syn_pop(self):
        self.syn.pop()

    def sem_push(self, vec):
        self.sem.push(self._drop(vec))

    def sem_pop(self):
        self.sem.pop()

    def action_push(self, t: Transition):
        vec = self.model.embed_action(t)
        self.act.push(self._drop(vec))

    # -- compositions -------------------------------------------------------

    def compose_syn(self, head_vec, dep_vec, label):
        m = self.model
        return compose_arc(m.tensor("syn_comp_W"), m.tensor("syn_comp_b"),
                           head_vec, dep_vec, m.embed_label(label))

    def compose_sem(self, head_vec, dep_vec, role):
        m = self.model
        return compose_arc(m.tensor("sem_comp_W"), m.tensor("sem_comp_b"),
                           head_vec, dep_vec, m.embed_role(role))

    def compose_pred(self, word_vec, sense):
        m = self.model
        return compose_predicate(m.tensor("pred_comp_W"),
                                 m.tensor("pred_comp_b"),
                                 word_vec, m.embed_sense(sense))

    # -- scoring ------------------------------------------------------------

    def summary(self) -> ad.Tensor:
        """relu(d + W [s; m; b; a]) for the stacks this model runs."""
        parts = []
        if self.syn is not None:
            parts.append(self.syn.query())
        if self.sem is not None:
            parts.append(self.sem.query())
        parts.append(self.buf.query())
        parts.append(self.act.query())
        stacked = self._drop(ad.concat(parts))
        m = self.model
        return ad.relu(ad.affine(m.tensor("state_W"), stacked,
                                 m.tensor("state_b")))

    def score(self, y: ad.Tensor, action_ids: np.ndarray) -> ad.Tensor:
        m = self.model
        return ad.gathered_scores(m.tensor("score_W"), m.tensor("score_b"),
                                  action_ids, y)
