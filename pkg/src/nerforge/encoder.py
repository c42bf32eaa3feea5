"""Token encoders producing one contextual vector per token.

Any object with ``register(store)``, ``encode(tokens, store)``, ``d_out``
and ``kind`` works as an encoder.  The shipped reference encoder is a
desk-scale embedding + bidirectional recurrent layer; a precomputed-vector
adapter is provided for externally supplied embeddings.
"""

from __future__ import annotations

from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .nn.store import ParameterStore
from .nn.tensor import Tensor, affine, hconcat, matmul, pick_row, pick_rows, stack_rows, tanh

UNK_TOKEN = "<unk>"


@runtime_checkable
class EncoderInterface(Protocol):
    kind: str
    trainable: bool

    @property
    def d_out(self) -> int: ...

    def register(self, store: ParameterStore) -> None: ...

    def encode(self, tokens: Sequence[str], store: ParameterStore) -> Tensor: ...


class ReferenceEncoder:
    """Embedding table plus a bidirectional tanh recurrence.

    Output dimension is 2 * d_hidden per token; unknown tokens map to a
    dedicated UNK row.  Deterministic given parameters and input.
    """

    kind = "birnn"
    trainable = True

    def __init__(self, vocab: Sequence[str], d_emb: int = 32, d_hidden: int = 32):
        self.d_emb = d_emb
        self.d_hidden = d_hidden
        self.token_ids: dict[str, int] = {UNK_TOKEN: 0}
        for token in vocab:
            if token not in self.token_ids:
                self.token_ids[token] = len(self.token_ids)

    @property
    def d_out(self) -> int:
        return 2 * self.d_hidden

    @property
    def vocab(self) -> list[str]:
        return list(self.token_ids)

    def register(self, store: ParameterStore) -> None:
        V, de, dh = len(self.token_ids), self.d_emb, self.d_hidden
        store.add("enc.emb", (V, de))
        for direction in ("fwd", "bwd"):
            store.add(f"enc.{direction}.W_ih", (dh, de))
            store.add(f"enc.{direction}.W_hh", (dh, dh))
            store.add(f"enc.{direction}.b", (dh,))

    def lookup_ids(self, tokens: Sequence[str]) -> list[int]:
        return [self.token_ids.get(t, 0) for t in tokens]

    def _run_direction(self, x: Tensor, store: ParameterStore, direction: str, order: range) -> list[Tensor]:
        W_ih = store.tensor(f"enc.{direction}.W_ih")
        W_hh = store.tensor(f"enc.{direction}.W_hh")
        b = store.tensor(f"enc.{direction}.b")
        h = Tensor(np.zeros(self.d_hidden))
        states: dict[int, Tensor] = {}
        for t in order:
            h = tanh(affine(pick_row(x, t), W_ih, b) + matmul(W_hh, h))
            states[t] = h
        return [states[t] for t in range(len(states))]

    def encode(self, tokens: Sequence[str], store: ParameterStore) -> Tensor:
        ids = self.lookup_ids(tokens)
        x = pick_rows(store.tensor("enc.emb"), ids)
        L = len(ids)
        fwd = self._run_direction(x, store, "fwd", range(L))
        bwd = self._run_direction(x, store, "bwd", range(L - 1, -1, -1))
        return hconcat(stack_rows(fwd), stack_rows(bwd))


class PrecomputedEncoder:
    """Adapter serving externally computed per-token vectors.

    ``vectors`` maps token strings to fixed float arrays of one shared
    dimension; tokens without a vector fall back to the UNK vector (zeros
    unless supplied).  Not trainable.
    """

    kind = "precomputed"
    trainable = False

    def __init__(self, vectors: dict[str, np.ndarray], d: int):
        self._d = d
        self.vectors = {k: np.asarray(v, dtype=np.float64) for k, v in vectors.items()}
        for key, value in self.vectors.items():
            if value.shape != (d,):
                raise ValueError(f"vector for {key!r} has shape {value.shape}, want ({d},)")
        self.unk = self.vectors.get(UNK_TOKEN, np.zeros(d))

    @property
    def d_out(self) -> int:
        return self._d

    def register(self, store: ParameterStore) -> None:
        return None

    def encode(self, tokens: Sequence[str], store: ParameterStore) -> Tensor:
        rows = [self.vectors.get(t, self.unk) for t in tokens]
        return Tensor(np.stack(rows))
