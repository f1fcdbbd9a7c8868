"""Optional adapter for downloaded causal language models.

Wraps a Hugging Face autoregressive model behind the scoring interface the
depth metrics consume: tokenize with character offsets, next-token
log-probabilities, and a descriptor. The transformers dependency is imported
lazily; everything else in the package works without it. Scoring-only: this
adapter does not encode or train.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .backends import (
    BackendDescriptor,
    ContextOverflowError,
    NextTokenDistribution,
    TokenSequence,
    prefix_ids,
)


class PretrainedUnavailableError(RuntimeError):
    """transformers is not installed or the model weights cannot be loaded."""


def load_pretrained_backend(model_name: str = "gpt2", context_window: Optional[int] = None):
    """Load a causal-LM scoring backend, or raise PretrainedUnavailableError."""
    try:
        import torch  # noqa: F401
        from transformers import AutoModelForCausalLM, AutoTokenizer
    except ImportError as exc:
        raise PretrainedUnavailableError(
            f"pretrained backend needs the 'transformers' extra: {exc}"
        ) from exc
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_name, use_fast=True)
        model = AutoModelForCausalLM.from_pretrained(model_name)
    except (OSError, ValueError) as exc:
        raise PretrainedUnavailableError(
            f"could not load pretrained model {model_name!r}: {exc}"
        ) from exc
    return CausalLMBackend(model_name, tokenizer, model, context_window)


class CausalLMBackend:
    """Causal-LM scorer; sequences are conditioned on the model's start token."""

    def __init__(self, model_name: str, tokenizer, model, context_window: Optional[int] = None):
        import torch

        self._torch = torch
        self.model_name = model_name
        self.tokenizer = tokenizer
        self.model = model.eval()
        start = tokenizer.bos_token_id
        if start is None:
            start = tokenizer.eos_token_id
        if start is None:
            raise PretrainedUnavailableError(
                f"{model_name!r} defines neither a bos nor an eos token to condition on"
            )
        self.start_token_id = int(start)
        model_window = getattr(model.config, "max_position_embeddings", None) or 1024
        # one slot is reserved for the prepended start token
        self.context_window = min(context_window or model_window, model_window) - 1
        self.vocab_size = int(model.config.vocab_size)

    @property
    def descriptor(self) -> BackendDescriptor:
        return BackendDescriptor(
            name=f"pretrained:{self.model_name}",
            vocab_size=self.vocab_size,
            supports_encoding=False,
            supports_training=False,
            start_id=self.start_token_id,
        )

    def tokenize(self, text: str) -> TokenSequence:
        encoded = self.tokenizer(text, return_offsets_mapping=True, add_special_tokens=False)
        return TokenSequence(
            ids=tuple(int(i) for i in encoded["input_ids"]),
            offsets=tuple((int(a), int(b)) for a, b in encoded["offset_mapping"]),
        )

    def detokenize(self, ids: Iterable[int]) -> str:
        return self.tokenizer.decode(list(ids)).strip()

    def next_token_logprobs(self, prefix) -> NextTokenDistribution:
        ids_list = prefix_ids(prefix)
        if len(ids_list) > self.context_window:
            raise ContextOverflowError(
                f"prefix of {len(ids_list)} tokens exceeds window {self.context_window}"
            )
        torch = self._torch
        ids = torch.tensor([[self.start_token_id] + ids_list], dtype=torch.long)
        with torch.no_grad():
            logits = self.model(ids).logits[0, -1]
        logprobs = torch.log_softmax(logits.double(), dim=0).numpy()
        return NextTokenDistribution(logprobs)
