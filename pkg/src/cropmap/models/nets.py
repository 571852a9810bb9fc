"""The ten gradient-trained sequence classifiers.

All share one calling convention: input is a (batch, steps, channels) float64
array of already-normalized series, output is a (batch, 3) logits Tensor.
Recurrent kinds keep the final hidden state; bidirectional kinds stack two
layers with inter-layer dropout and concatenate the two directions' final
states; the At-variants add multi-head self-attention over the bidirectional
output sequence followed by mean pooling; the Transformer runs an input
projection, sinusoidal position codes, two encoder blocks, and mean pooling.

Parameters live in an ordered name -> Tensor dict so optimizers, serialization,
head freezing, and the domain-adversarial split can all address them by name.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..errors import ShapeMismatch, UnsupportedModelKind
from .config import ModelConfig, ModelKind

HEAD_PREFIX = "head."
N_CLASSES = 3


def head_param_names(params: dict) -> set:
    return {name for name in params if name.startswith(HEAD_PREFIX)}


def _affine(x, W, b):
    return ad.add(ad.matmul(x, W), b)


def sinusoidal_position_codes(steps: int, d_model: int) -> np.ndarray:
    """Fixed sin/cos position table, (steps, d_model)."""
    pos = np.arange(steps, dtype=np.float64)[:, None]
    i = np.arange(d_model, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2.0 * np.floor(i / 2.0)) / d_model)
    table = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return table


class SequenceModel:
    """One of the ten gradient classifiers, parameterized by ModelConfig."""

    def __init__(self, cfg: ModelConfig, n_channels: int, steps: int, rng: np.random.Generator | None = None, params: dict | None = None):
        if cfg.kind.is_forest:
            raise UnsupportedModelKind("RF is not a gradient model")
        self.cfg = cfg
        self.n_channels = n_channels
        self.steps = steps
        if cfg.kind is ModelKind.TRANSFORMER:
            self._pe = sinusoidal_position_codes(steps, cfg.d_model)
        if params is not None:
            self.params = dict(params)
        else:
            if rng is None:
                rng = np.random.default_rng(cfg.seed)
            self.params = self._init_params(rng)

    # -- construction --------------------------------------------------------

    def _init_params(self, rng: np.random.Generator) -> dict:
        cfg = self.cfg
        p: dict[str, ad.Tensor] = {}

        def weight(name, shape, fan_in):
            p[name] = ad.parameter(rng, shape, fan_in=fan_in)

        def bias(name, size):
            p[name] = ad.Tensor(np.zeros(size), requires_grad=True)

        if cfg.kind is ModelKind.TRANSFORMER:
            d = cfg.d_model
            weight("proj.W", (self.n_channels, d), self.n_channels)
            bias("proj.b", d)
            for i in range(cfg.layers):
                for part in ("Wq", "Wk", "Wv", "Wo"):
                    weight(f"enc{i}.att.{part}", (d, d), d)
                for part in ("bq", "bk", "bv", "bo"):
                    bias(f"enc{i}.att.{part}", d)
                p[f"enc{i}.ln1.g"] = ad.Tensor(np.ones(d), requires_grad=True)
                bias(f"enc{i}.ln1.b", d)
                weight(f"enc{i}.ff.W1", (d, cfg.dim_feedforward), d)
                bias(f"enc{i}.ff.b1", cfg.dim_feedforward)
                weight(f"enc{i}.ff.W2", (cfg.dim_feedforward, d), cfg.dim_feedforward)
                bias(f"enc{i}.ff.b2", d)
                p[f"enc{i}.ln2.g"] = ad.Tensor(np.ones(d), requires_grad=True)
                bias(f"enc{i}.ln2.b", d)
            weight("head.W", (d, N_CLASSES), d)
            bias("head.b", N_CLASSES)
            return p

        h = cfg.hidden_size
        gates = {"rnn": 1, "lstm": 4, "gru": 3}[cfg.kind.cell]
        dirs = ("f", "b") if cfg.kind.bidirectional else ("f",)
        in_dim = self.n_channels
        for layer in range(self.cfg.layers):
            for d in dirs:
                prefix = f"rec{layer}.{d}."
                weight(prefix + "Wx", (in_dim, gates * h), in_dim)
                weight(prefix + "Wh", (h, gates * h), h)
                bias(prefix + "bx", gates * h)
                bias(prefix + "bh", gates * h)
            in_dim = h * len(dirs)
        feat = h * len(dirs)
        if cfg.kind.attentive:
            for part in ("Wq", "Wk", "Wv", "Wo"):
                weight(f"att.{part}", (feat, feat), feat)
            for part in ("bq", "bk", "bv", "bo"):
                bias(f"att.{part}", feat)
        weight("head.W", (feat, N_CLASSES), feat)
        bias("head.b", N_CLASSES)
        return p

    @property
    def feature_dim(self) -> int:
        if self.cfg.kind is ModelKind.TRANSFORMER:
            return self.cfg.d_model
        return self.cfg.hidden_size * (2 if self.cfg.kind.bidirectional else 1)

    # -- recurrent machinery ---------------------------------------------------

    def _step(self, prefix: str, x_t, h, c):
        p = self.params
        cell = self.cfg.kind.cell
        hs = self.cfg.hidden_size
        if cell in ("rnn", "lstm"):
            z = ad.add(_affine(x_t, p[prefix + "Wx"], p[prefix + "bx"]), _affine(h, p[prefix + "Wh"], p[prefix + "bh"]))
        if cell == "rnn":
            return ad.tanh(z), c
        if cell == "lstm":
            i = ad.sigmoid(z[:, 0 * hs : 1 * hs])
            f = ad.sigmoid(z[:, 1 * hs : 2 * hs])
            g = ad.tanh(z[:, 2 * hs : 3 * hs])
            o = ad.sigmoid(z[:, 3 * hs : 4 * hs])
            c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
            return ad.mul(o, ad.tanh(c_new)), c_new
        # gru: the candidate's hidden half is gated by r before the bias-joined sum,
        # so the fused z above is only valid for r and z gates
        zx = _affine(x_t, p[prefix + "Wx"], p[prefix + "bx"])
        zh = _affine(h, p[prefix + "Wh"], p[prefix + "bh"])
        r = ad.sigmoid(ad.add(zx[:, 0 * hs : 1 * hs], zh[:, 0 * hs : 1 * hs]))
        u = ad.sigmoid(ad.add(zx[:, 1 * hs : 2 * hs], zh[:, 1 * hs : 2 * hs]))
        n = ad.tanh(ad.add(zx[:, 2 * hs : 3 * hs], ad.mul(r, zh[:, 2 * hs : 3 * hs])))
        one_minus_u = ad.sub(1.0, u)
        return ad.add(ad.mul(one_minus_u, n), ad.mul(u, h)), c

    def _run_direction(self, prefix: str, xs: list, reverse: bool) -> list:
        """Returns per-step hidden states in original time order."""
        batch = xs[0].shape[0]
        hs = self.cfg.hidden_size
        h = ad.Tensor(np.zeros((batch, hs)))
        c = ad.Tensor(np.zeros((batch, hs)))
        order = range(len(xs) - 1, -1, -1) if reverse else range(len(xs))
        out: list = [None] * len(xs)
        for t in order:
            h, c = self._step(prefix, xs[t], h, c)
            out[t] = h
        return out

    def _recurrent_stack(self, x, train: bool, rng):
        """Runs all recurrent layers; returns (per-step outputs of last layer,
        final forward state, final backward state or None)."""
        steps = x.shape[1]
        xs = [x[:, t, :] for t in range(steps)]
        bidir = self.cfg.kind.bidirectional
        fwd = bwd = None
        for layer in range(self.cfg.layers):
            fwd = self._run_direction(f"rec{layer}.f.", xs, reverse=False)
            if bidir:
                bwd = self._run_direction(f"rec{layer}.b.", xs, reverse=True)
                xs = [ad.concat([f, b], axis=1) for f, b in zip(fwd, bwd)]
            else:
                xs = fwd
            if train and self.cfg.dropout > 0 and layer < self.cfg.layers - 1:
                xs = [ad.dropout(t, self.cfg.dropout, rng, train=True) for t in xs]
        final_f = fwd[-1]
        final_b = bwd[0] if bidir else None
        return xs, final_f, final_b

    # -- forward -----------------------------------------------------------------

    def features(self, X: np.ndarray, train: bool = False, rng: np.random.Generator | None = None, return_attention: bool = False):
        """Pooled pre-head feature vector, (batch, feature_dim)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[2] != self.n_channels:
            raise ShapeMismatch(f"expected (batch, steps, {self.n_channels}), got {X.shape}")
        if train and rng is None:
            rng = np.random.default_rng(0)
        x = ad.Tensor(X)
        attn = None
        if self.cfg.kind is ModelKind.TRANSFORMER:
            feats = self._transformer_features(x, train, rng)
        elif self.cfg.kind.attentive:
            outs, _, _ = self._recurrent_stack(x, train, rng)
            seq = ad.stack(outs, axis=1)
            p = self.params
            q = _affine(seq, p["att.Wq"], p["att.bq"])
            k = _affine(seq, p["att.Wk"], p["att.bk"])
            v = _affine(seq, p["att.Wv"], p["att.bv"])
            ctx, attn = ad.attention(q, k, v, self.cfg.attention_heads, return_weights=True)
            ctx = _affine(ctx, p["att.Wo"], p["att.bo"])
            feats = ad.tmean(ctx, axis=1)
        elif self.cfg.kind.bidirectional:
            _, final_f, final_b = self._recurrent_stack(x, train, rng)
            feats = ad.concat([final_f, final_b], axis=1)
        else:
            _, final_f, _ = self._recurrent_stack(x, train, rng)
            feats = final_f
        if return_attention:
            return feats, attn
        return feats

    def _transformer_features(self, x, train: bool, rng):
        p = self.params
        h = ad.add(_affine(x, p["proj.W"], p["proj.b"]), ad.Tensor(self._pe[: x.shape[1]]))
        for i in range(self.cfg.layers):
            pre = f"enc{i}."
            q = _affine(h, p[pre + "att.Wq"], p[pre + "att.bq"])
            k = _affine(h, p[pre + "att.Wk"], p[pre + "att.bk"])
            v = _affine(h, p[pre + "att.Wv"], p[pre + "att.bv"])
            a = ad.attention(q, k, v, self.cfg.nhead)
            a = _affine(a, p[pre + "att.Wo"], p[pre + "att.bo"])
            if train and self.cfg.dropout > 0:
                a = ad.dropout(a, self.cfg.dropout, rng, train=True)
            h = ad.layer_norm(ad.add(h, a), p[pre + "ln1.g"], p[pre + "ln1.b"])
            f = _affine(ad.relu(_affine(h, p[pre + "ff.W1"], p[pre + "ff.b1"])), p[pre + "ff.W2"], p[pre + "ff.b2"])
            if train and self.cfg.dropout > 0:
                f = ad.dropout(f, self.cfg.dropout, rng, train=True)
            h = ad.layer_norm(ad.add(h, f), p[pre + "ln2.g"], p[pre + "ln2.b"])
        return ad.tmean(h, axis=1)

    def head(self, feats):
        return _affine(feats, self.params["head.W"], self.params["head.b"])

    def forward(self, X: np.ndarray, train: bool = False, rng: np.random.Generator | None = None):
        return self.head(self.features(X, train=train, rng=rng))

    # -- parameter plumbing ------------------------------------------------------

    def param_arrays(self) -> dict:
        return {name: t.data.copy() for name, t in self.params.items()}

    def load_param_arrays(self, arrays: dict):
        for name, t in self.params.items():
            if name not in arrays:
                raise ShapeMismatch(f"missing parameter {name}")
            if arrays[name].shape != t.data.shape:
                raise ShapeMismatch(f"parameter {name}: {arrays[name].shape} vs {t.data.shape}")
            t.data = arrays[name].astype(np.float64).copy()
        return self

    @classmethod
    def from_arrays(cls, cfg: ModelConfig, n_channels: int, steps: int, arrays: dict) -> "SequenceModel":
        model = cls(cfg, n_channels, steps, rng=np.random.default_rng(0))
        model.load_param_arrays(arrays)
        return model
