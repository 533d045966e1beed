"""Token vocabulary, triple encoding, and the three-branch Q-network.

Each memory entry becomes a triple of token embeddings laid out as
(head, relation, tail).  There is a single relation, so its slot is
structurally zero and token 0 is reserved for it; the same zero fills the
head slot of an empty branch.  Entries are sorted ascending by value
(timestamp or strength) before encoding, stable so equal values keep
insertion order.

One branch per memory system: encode, two LSTM layers, linear + ReLU.
The three branch vectors concatenate into a shared head that emits one
Q-value per management action.
"""
from __future__ import annotations

import io
import pickle
from dataclasses import dataclass

import numpy as np

from .kb import KnowledgeBase
from .memory import EPISODIC, SEMANTIC, SHORT_TERM, N_ACTIONS, strip_owner
from .nn import (
    Adam,
    GradientError,
    LstmLayer,
    ParamTensor,
    embedding_backward,
    embedding_lookup,
    init_uniform,
    linear_backward,
    linear_forward,
    lstm_batch_backward,
    lstm_batch_forward,
    relu_backward,
    relu_forward,
)

__all__ = [
    "VocabError",
    "CheckpointError",
    "Vocabulary",
    "QNetwork",
    "encode_system",
    "kge_encode",
    "encode_state",
    "greedy_action",
]

_CKPT_MAGIC = b"ROOMMEMCKPT1\n"

BRANCHES = (SHORT_TERM, EPISODIC, SEMANTIC)


class VocabError(KeyError):
    """Name outside the token vocabulary."""


class CheckpointError(ValueError):
    """Unreadable or mismatched checkpoint blob."""


@dataclass(frozen=True)
class Vocabulary:
    """Fixed token table: 0 is the relation/pad token, then humans, objects,
    locations in their canonical orders."""

    humans: tuple[str, ...]
    objects: tuple[str, ...]
    locations: tuple[str, ...]

    def __post_init__(self):
        tokens: dict[str, int] = {}
        nxt = 1
        for group in (self.humans, self.objects, self.locations):
            for name in group:
                if name in tokens:
                    raise VocabError(f"duplicate vocabulary name {name!r}")
                tokens[name] = nxt
                nxt += 1
        object.__setattr__(self, "_tokens", tokens)

    @classmethod
    def build(cls, human_names, kb: KnowledgeBase) -> "Vocabulary":
        return cls(tuple(human_names), kb.objects, kb.locations)

    @property
    def n_tokens(self) -> int:
        return 1 + len(self.humans) + len(self.objects) + len(self.locations)

    def token(self, name: str) -> int:
        try:
            return self._tokens[name]
        except KeyError:
            raise VocabError(f"unknown name {name!r}") from None


def _entry_tokens(vocab: Vocabulary, kind: str, entry) -> tuple[int, int, int]:
    loc_tok = vocab.token(entry.tail)
    if kind == SEMANTIC:
        return vocab.token(entry.head), -1, loc_tok
    owner, obj = strip_owner(entry.head)
    return vocab.token(owner), vocab.token(obj), loc_tok


def encode_system(vocab: Vocabulary, kind: str, entries) -> np.ndarray:
    """Token codes for one memory system, sorted ascending by entry value.

    Rows are (tok_a, tok_b, tok_tail) int32; tok_b is -1 for semantic
    entries, whose head is a bare object."""
    order = sorted(range(len(entries)), key=lambda i: entries[i].value)
    rows = np.empty((len(entries), 3), dtype=np.int32)
    for r, i in enumerate(order):
        rows[r] = _entry_tokens(vocab, kind, entries[i])
    return rows


def kge_encode(vocab: Vocabulary, table: ParamTensor, kind: str, entries) -> np.ndarray:
    """Embed one system's entries as (n, 3*d) rows laid out head | relation
    | tail.  The relation third is zero; a head naming both a human and an
    object embeds as the sum of the two."""
    codes = encode_system(vocab, kind, entries)
    d = table.values.shape[1]
    out = np.zeros((codes.shape[0], 3 * d), dtype=table.values.dtype)
    for r, (a, b, tail) in enumerate(codes):
        head = embedding_lookup(table, a)
        if b >= 0:
            head = head + embedding_lookup(table, b)
        out[r, :d] = head
        out[r, 2 * d:] = embedding_lookup(table, tail)
    return out


def encode_state(vocab: Vocabulary, state) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Token codes for a (short_term, episodic, semantic) snapshot."""
    short, episodic, semantic = state
    return (
        encode_system(vocab, SHORT_TERM, short),
        encode_system(vocab, EPISODIC, episodic),
        encode_system(vocab, SEMANTIC, semantic),
    )


def _gather(table: ParamTensor, codes: np.ndarray) -> np.ndarray:
    """(n, 3) token codes -> (n, 3*d) embedded rows, middle third zero."""
    d = table.values.shape[1]
    n = codes.shape[0]
    out = np.zeros((n, 3 * d), dtype=table.values.dtype)
    if n == 0:
        return out
    out[:, :d] = table.values[codes[:, 0]]
    b = codes[:, 1]
    has_b = b >= 0
    if has_b.any():
        out[has_b, :d] += table.values[b[has_b]]
    out[:, 2 * d:] = table.values[codes[:, 2]]
    return out


def _scatter_grad(table: ParamTensor, codes: np.ndarray, dX: np.ndarray) -> None:
    d = table.values.shape[1]
    if codes.shape[0] == 0:
        return
    np.add.at(table.grad, codes[:, 0], dX[:, :d])
    b = codes[:, 1]
    has_b = b >= 0
    if has_b.any():
        np.add.at(table.grad, b[has_b], dX[has_b, :d])
    np.add.at(table.grad, codes[:, 2], dX[:, 2 * d:])


@dataclass
class _Branch:
    lstm: list[LstmLayer]
    w: ParamTensor
    b: ParamTensor

    def parameters(self) -> list[ParamTensor]:
        out: list[ParamTensor] = []
        for layer in self.lstm:
            out.extend(layer.parameters())
        out.extend([self.w, self.b])
        return out


class QNetwork:
    """Three encode-LSTM-linear branches feeding a shared two-layer head."""

    def __init__(self, vocab: Vocabulary, embedding: ParamTensor,
                 branches: dict[str, _Branch], head_w1: ParamTensor,
                 head_b1: ParamTensor, head_w2: ParamTensor, head_b2: ParamTensor,
                 d_emb: int, hidden: int):
        self.vocab = vocab
        self.embedding = embedding
        self.branches = branches
        self.head_w1 = head_w1
        self.head_b1 = head_b1
        self.head_w2 = head_w2
        self.head_b2 = head_b2
        self.d_emb = d_emb
        self.hidden = hidden

    @classmethod
    def create(cls, vocab: Vocabulary, seed: int, d_emb: int = 32,
               hidden: int = 64, n_layers: int = 2, dtype=np.float64) -> "QNetwork":
        rng = np.random.default_rng(seed)
        embedding = init_uniform(rng, (vocab.n_tokens, d_emb), d_emb, dtype, "embedding")
        branches: dict[str, _Branch] = {}
        for kind in BRANCHES:
            layers = []
            d_in = 3 * d_emb
            for li in range(n_layers):
                layers.append(LstmLayer.create(rng, d_in, hidden, dtype, f"{kind}.lstm{li}"))
                d_in = hidden
            w = init_uniform(rng, (hidden, hidden), hidden, dtype, f"{kind}.proj.w")
            b = init_uniform(rng, (hidden,), hidden, dtype, f"{kind}.proj.b")
            branches[kind] = _Branch(layers, w, b)
        cat = hidden * len(BRANCHES)
        head_w1 = init_uniform(rng, (hidden, cat), cat, dtype, "head1.w")
        head_b1 = init_uniform(rng, (hidden,), cat, dtype, "head1.b")
        head_w2 = init_uniform(rng, (N_ACTIONS, hidden), hidden, dtype, "head2.w")
        head_b2 = init_uniform(rng, (N_ACTIONS,), hidden, dtype, "head2.b")
        return cls(vocab, embedding, branches, head_w1, head_b1, head_w2, head_b2,
                   d_emb, hidden)

    # -- parameter plumbing --------------------------------------------------

    def parameters(self) -> list[ParamTensor]:
        out = [self.embedding]
        for kind in BRANCHES:
            out.extend(self.branches[kind].parameters())
        out.extend([self.head_w1, self.head_b1, self.head_w2, self.head_b2])
        return out

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def clone(self) -> "QNetwork":
        other = QNetwork.create(self.vocab, seed=0, d_emb=self.d_emb,
                                hidden=self.hidden,
                                n_layers=len(self.branches[SHORT_TERM].lstm),
                                dtype=self.embedding.values.dtype)
        other.copy_values_from(self)
        return other

    def copy_values_from(self, other: "QNetwork") -> None:
        mine, theirs = self.parameters(), other.parameters()
        if len(mine) != len(theirs):
            raise ValueError("parameter structure mismatch")
        for p, q in zip(mine, theirs):
            if p.values.shape != q.values.shape:
                raise ValueError(f"shape mismatch for {p.name}: {p.values.shape} vs {q.values.shape}")
            p.values[...] = q.values

    # -- forward -------------------------------------------------------------

    def forward(self, state) -> np.ndarray:
        """Q-values for one (short, episodic, semantic) snapshot."""
        enc = encode_state(self.vocab, state)
        return self.forward_encoded(enc)

    def forward_encoded(self, enc) -> np.ndarray:
        q, _ = self.forward_batch([enc], need_cache=False)
        return q[0]

    def forward_batch(self, enc_states, need_cache: bool = False):
        """Q-values for a batch of encoded states: list of (codes_short,
        codes_episodic, codes_semantic) int32 arrays.  Returns (q (B, A),
        cache or None)."""
        B = len(enc_states)
        dtype = self.embedding.values.dtype
        branch_caches = {}
        feats = []
        for bi, kind in enumerate(BRANCHES):
            codes = [enc[bi] for enc in enc_states]
            lengths = np.array([c.shape[0] for c in codes], dtype=np.int64)
            T = int(lengths.max()) if B else 0
            d3 = 3 * self.d_emb
            X = np.zeros((T, B, d3), dtype=dtype)
            mask = np.zeros((T, B, 1), dtype=dtype)
            for s, c in enumerate(codes):
                n = c.shape[0]
                if n:
                    X[:n, s, :] = _gather(self.embedding, c)
                    mask[:n, s, 0] = 1.0
            branch = self.branches[kind]
            h_last, lstm_caches = lstm_batch_forward(X, mask, branch.lstm,
                                                     need_cache=need_cache)
            z, lin_x = linear_forward(h_last, branch.w, branch.b)
            a, relu_m = relu_forward(z)
            feats.append(a)
            if need_cache:
                branch_caches[kind] = (codes, mask, lstm_caches, lin_x, relu_m)
        cat = np.concatenate(feats, axis=1)
        z1, x1 = linear_forward(cat, self.head_w1, self.head_b1)
        a1, m1 = relu_forward(z1)
        q, x2 = linear_forward(a1, self.head_w2, self.head_b2)
        cache = (branch_caches, x1, m1, x2) if need_cache else None
        return q, cache

    def backward_batch(self, cache, dq: np.ndarray) -> None:
        """Accumulate parameter gradients given dLoss/dQ for a cached batch."""
        branch_caches, x1, m1, x2 = cache
        da1 = linear_backward(x2, self.head_w2, self.head_b2, dq)
        dz1 = relu_backward(m1, da1)
        dcat = linear_backward(x1, self.head_w1, self.head_b1, dz1)
        h = self.hidden
        for bi, kind in enumerate(BRANCHES):
            codes, mask, lstm_caches, lin_x, relu_m = branch_caches[kind]
            da = dcat[:, bi * h:(bi + 1) * h]
            dz = relu_backward(relu_m, da)
            branch = self.branches[kind]
            dh_last = linear_backward(lin_x, branch.w, branch.b, dz)
            if not lstm_caches:  # all-empty branch contributed constant zeros
                continue
            dX = lstm_batch_backward(lstm_caches, branch.lstm, mask, dh_last)
            for s, c in enumerate(codes):
                n = c.shape[0]
                if n:
                    _scatter_grad(self.embedding, c, dX[:n, s, :])

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        payload = {
            "version": 1,
            "vocab": (self.vocab.humans, self.vocab.objects, self.vocab.locations),
            "d_emb": self.d_emb,
            "hidden": self.hidden,
            "n_layers": len(self.branches[SHORT_TERM].lstm),
            "dtype": self.embedding.values.dtype.str,
            "tensors": {p.name: p.values for p in self.parameters()},
        }
        buf = io.BytesIO()
        buf.write(_CKPT_MAGIC)
        pickle.dump(payload, buf, protocol=4)
        with open(path, "wb") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def load(cls, path) -> "QNetwork":
        with open(path, "rb") as fh:
            blob = fh.read()
        if not blob.startswith(_CKPT_MAGIC):
            raise CheckpointError(f"{path}: not a checkpoint file")
        try:
            payload = pickle.loads(blob[len(_CKPT_MAGIC):])
        except Exception as exc:
            raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
        if not isinstance(payload, dict) or payload.get("version") != 1:
            raise CheckpointError(f"{path}: unsupported checkpoint version")
        humans, objects, locations = payload["vocab"]
        vocab = Vocabulary(tuple(humans), tuple(objects), tuple(locations))
        dtype = np.dtype(payload["dtype"])
        net = cls.create(vocab, seed=0, d_emb=payload["d_emb"],
                         hidden=payload["hidden"], n_layers=payload["n_layers"],
                         dtype=dtype)
        tensors = payload["tensors"]
        for p in net.parameters():
            if p.name not in tensors:
                raise CheckpointError(f"{path}: missing tensor {p.name}")
            vals = np.asarray(tensors[p.name], dtype=dtype)
            if vals.shape != p.values.shape:
                raise CheckpointError(
                    f"{path}: tensor {p.name} has shape {vals.shape}, expected {p.values.shape}")
            p.values[...] = vals
        return net


def greedy_action(q: np.ndarray) -> int:
    """Argmax with first-index tie-break; refuses non-finite inputs."""
    if not np.all(np.isfinite(q)):
        raise GradientError(f"non-finite q-values: {q}")
    return int(np.argmax(q))
