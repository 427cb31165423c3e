"""Scorer model: bidirectional transformer encoder with two heads.

The path head reads the hidden state of the sequence-start token and the
step head reads the hidden state of each step's last token; both go
through a sigmoid, so every score lands in [0, 1].  The encoder here is a
compact trainable stand-in with the same interface a pretrained backbone
would have; swapping one in only changes the module behind `encoder`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

from .data import PAD_ID, Encoded, HashTokenizer, TokenizerConfig, encode_input


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int = 8192
    dim: int = 128
    n_heads: int = 4
    n_layers: int = 2
    ffn_dim: int = 256
    max_len: int = 512
    dropout: float = 0.1


class ScorerModel(nn.Module):
    def __init__(self, config: ModelConfig = ModelConfig()):
        super().__init__()
        self.config = config
        self.tokenizer = HashTokenizer(TokenizerConfig(vocab_size=config.vocab_size))
        self.embedding = nn.Embedding(config.vocab_size, config.dim, padding_idx=PAD_ID)
        self.positional = nn.Embedding(config.max_len, config.dim)
        layer = nn.TransformerEncoderLayer(
            d_model=config.dim,
            nhead=config.n_heads,
            dim_feedforward=config.ffn_dim,
            dropout=config.dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(
            layer, num_layers=config.n_layers, enable_nested_tensor=False
        )
        self.path_head = nn.Linear(config.dim, 1)
        self.step_head = nn.Linear(config.dim, 1)

    def head_parameters(self):
        yield from self.path_head.parameters()
        yield from self.step_head.parameters()

    def freeze_encoder(self) -> None:
        for name, parameter in self.named_parameters():
            if not name.startswith(("path_head", "step_head")):
                parameter.requires_grad_(False)

    def forward(self, token_ids: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """token_ids [B, T] -> (path_logits [B], token_logits [B, T])."""
        batch, length = token_ids.shape
        pad_mask = token_ids.eq(PAD_ID)
        positions = torch.arange(length, device=token_ids.device).unsqueeze(0)
        hidden = self.embedding(token_ids) + self.positional(positions)
        hidden = self.encoder(hidden, src_key_padding_mask=pad_mask)
        path_logits = self.path_head(hidden[:, 0, :]).squeeze(-1)
        token_logits = self.step_head(hidden).squeeze(-1)
        return path_logits, token_logits

    def encode(self, question: str, path_text: str, spans: list[tuple[int, int]]) -> Encoded:
        return encode_input(self.tokenizer, question, path_text, spans, self.config.max_len)

    @torch.no_grad()
    def score(
        self, question: str, path_text: str, spans: list[tuple[int, int]]
    ) -> tuple[float, list[float]]:
        """Path probability and one step probability per span (eval mode)."""
        was_training = self.training
        self.eval()
        try:
            encoded = self.encode(question, path_text, spans)
            token_ids = torch.tensor([encoded.token_ids], dtype=torch.long)
            path_logits, token_logits = self(token_ids)
            path_score = torch.sigmoid(path_logits[0]).item()
            step_scores = []
            for position in encoded.step_positions:
                read_at = position if position is not None else 0
                step_scores.append(torch.sigmoid(token_logits[0, read_at]).item())
            return path_score, step_scores
        finally:
            self.train(was_training)


def collate(encoded: list[Encoded], device: torch.device | None = None) -> torch.Tensor:
    """Pad a batch of token-id lists into one [B, T] tensor."""
    width = max(len(e.token_ids) for e in encoded)
    batch = torch.full((len(encoded), width), PAD_ID, dtype=torch.long, device=device)
    for i, item in enumerate(encoded):
        batch[i, : len(item.token_ids)] = torch.tensor(item.token_ids, dtype=torch.long)
    return batch


def save_model(model: ScorerModel, out_dir: str | Path, extra: dict | None = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out_dir / "model.pt")
    payload = {"model": asdict(model.config)}
    if extra:
        payload.update(extra)
    (out_dir / "config.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return out_dir


def load_model(model_dir: str | Path) -> ScorerModel:
    model_dir = Path(model_dir)
    payload = json.loads((model_dir / "config.json").read_text(encoding="utf-8"))
    model = ScorerModel(ModelConfig(**payload["model"]))
    state = torch.load(model_dir / "model.pt", map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model
