"""Trainable word-level transformer encoder backend (torch)."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from .backends import BackendDescriptor, TokenSequence, WordBackend, WordVocab


class EncoderModule(nn.Module):
    """Token + position embeddings followed by standard transformer layers."""

    def __init__(self, vocab_size: int, hidden_dim: int, layers: int, heads: int, max_len: int):
        super().__init__()
        self.tok_emb = nn.Embedding(vocab_size, hidden_dim)
        self.pos_emb = nn.Embedding(max_len, hidden_dim)
        if layers > 0:
            layer = nn.TransformerEncoderLayer(
                d_model=hidden_dim,
                nhead=heads,
                dim_feedforward=4 * hidden_dim,
                dropout=0.0,
                batch_first=True,
            )
            self.layers = nn.TransformerEncoder(layer, num_layers=layers, enable_nested_tensor=False)
        else:
            self.layers = None

    def forward(self, ids: torch.Tensor, pad_mask: Optional[torch.Tensor] = None) -> torch.Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.tok_emb(ids) + self.pos_emb(positions)[None, :, :]
        if self.layers is not None:
            x = self.layers(x, src_key_padding_mask=pad_mask)
        return x


class TorchEncoderBackend(WordBackend):
    """Encoding backend over the shared word tokenizer.

    Inference (`encode`, `encode_ids`) runs in eval mode without gradients and
    is deterministic; training code drives `encode_batch` on `self.module`
    under exclusive access.
    """

    def __init__(
        self,
        vocab: WordVocab,
        hidden_dim: int = 64,
        layers: int = 2,
        heads: int = 4,
        max_len: int = 128,
        seed: int = 0,
    ):
        super().__init__(vocab, context_window=max_len)
        self.name = "torch-encoder"
        self.hidden_dim = hidden_dim
        self.layers = layers
        self.heads = heads
        self.max_len = max_len
        torch.manual_seed(seed)
        self.module = EncoderModule(len(vocab), hidden_dim, layers, heads, max_len)
        self.module.eval()

    @property
    def descriptor(self) -> BackendDescriptor:
        return BackendDescriptor(
            name=self.name,
            vocab_size=len(self.vocab),
            supports_encoding=True,
            supports_training=True,
            start_id=self.vocab.start_id,
            cls_id=self.vocab.cls_id,
            sep_id=self.vocab.sep_id,
            unk_id=self.vocab.unk_id,
            eot_id=self.vocab.eot_id,
        )

    def encode_ids(self, ids: Sequence[int]) -> np.ndarray:
        self._check_window(len(ids))
        self.module.eval()
        with torch.no_grad():
            out = self.module(torch.tensor([list(ids)], dtype=torch.long))
        return out[0].numpy()

    def encode(self, sequence: TokenSequence) -> np.ndarray:
        return self.encode_ids(sequence.ids)

    def encode_batch(self, id_lists: Sequence[Sequence[int]]) -> tuple[torch.Tensor, list[int]]:
        """Padded batched encoding on the autograd graph.

        Returns the (B, L_max, d) output and the true length of each row;
        padded positions are masked out of attention and must not be read.
        """
        lengths = [len(ids) for ids in id_lists]
        for n in lengths:
            self._check_window(n)
        max_len = max(lengths)
        ids = torch.zeros((len(id_lists), max_len), dtype=torch.long)
        pad_mask = torch.ones((len(id_lists), max_len), dtype=torch.bool)
        for row, seq in enumerate(id_lists):
            ids[row, : len(seq)] = torch.tensor(list(seq), dtype=torch.long)
            pad_mask[row, : len(seq)] = False
        return self.module(ids, pad_mask=pad_mask), lengths
