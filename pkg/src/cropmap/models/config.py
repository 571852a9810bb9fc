"""Model configuration: the eleven classifier kinds and their dial settings."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from ..errors import ConfigError


class ModelKind(str, enum.Enum):
    RF = "RF"
    RNN = "RNN"
    LSTM = "LSTM"
    GRU = "GRU"
    BIRNN = "BiRNN"
    BILSTM = "BiLSTM"
    BIGRU = "BiGRU"
    ATBIRNN = "AtBiRNN"
    ATBILSTM = "AtBiLSTM"
    ATBIGRU = "AtBiGRU"
    TRANSFORMER = "Transformer"

    @classmethod
    def parse(cls, name: str) -> "ModelKind":
        for kind in cls:
            if kind.value.lower() == name.lower():
                return kind
        raise ConfigError(f"unknown model kind {name!r}; choose from {[k.value for k in cls]}")

    @property
    def is_forest(self) -> bool:
        return self is ModelKind.RF

    @property
    def bidirectional(self) -> bool:
        return self in (
            ModelKind.BIRNN,
            ModelKind.BILSTM,
            ModelKind.BIGRU,
            ModelKind.ATBIRNN,
            ModelKind.ATBILSTM,
            ModelKind.ATBIGRU,
        )

    @property
    def attentive(self) -> bool:
        return self in (ModelKind.ATBIRNN, ModelKind.ATBILSTM, ModelKind.ATBIGRU)

    @property
    def cell(self) -> str:
        """Recurrent cell family: 'rnn', 'lstm', or 'gru'."""
        name = self.value.lower()
        for fam in ("lstm", "gru", "rnn"):
            if fam in name:
                return fam
        raise ConfigError(f"{self.value} has no recurrent cell")


@dataclass(frozen=True)
class ModelConfig:
    """Only the fields relevant to ``kind`` are honored; the rest sit idle."""

    kind: ModelKind
    hidden_size: int = 256
    num_layers: int = 0  # 0 = per-kind default: 1 unidirectional, 2 bidirectional
    dropout: float = 0.2
    d_model: int = 512
    nhead: int = 8
    dim_feedforward: int = 256
    attention_heads: int = 4
    n_estimators: int = 500
    max_features: int = 8
    seed: int = 100
    lr: float = 5e-4
    batch_size: int = 4096
    epochs: int = 40

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        if self.hidden_size < 1 or self.d_model < 1:
            raise ConfigError("model widths must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout {self.dropout} outside [0, 1)")
        if self.d_model % self.nhead:
            raise ConfigError(f"d_model {self.d_model} not divisible by nhead {self.nhead}")

    @property
    def layers(self) -> int:
        if self.num_layers:
            return self.num_layers
        if self.kind is ModelKind.TRANSFORMER:
            return 2
        return 2 if self.kind.bidirectional else 1

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items()}
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["kind"] = ModelKind.parse(d["kind"])
        return cls(**d)


def paper_profile(kind: ModelKind, **overrides) -> ModelConfig:
    """Full-scale dimensions as published."""
    return replace(ModelConfig(kind=kind), **overrides)


def desk_profile(kind: ModelKind, **overrides) -> ModelConfig:
    """Scaled-down preset for laptop-class runs and CI."""
    base = ModelConfig(
        kind=kind,
        hidden_size=64,
        d_model=64,
        dim_feedforward=64,
        batch_size=256,
        n_estimators=60,
        epochs=12,
    )
    return replace(base, **overrides)
