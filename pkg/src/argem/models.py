"""Encoder, decoders, discriminator and loss terms of the ARGA model family.

Weights live in small dataclasses whose fields are either numpy arrays (stored
state) or :class:`~argem.autodiff.Var` handles (while recording a tape); use
``.on(tape)`` to move from the former to the latter.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import ContractError, ShapeError, Var

INNER_PRODUCT = "inner_product"
GCN_STRUCTURE = "gcn_structure"
GCN_CONTENT = "gcn_content"

VARIANTS = {
    "arga": (False, INNER_PRODUCT),
    "arvga": (True, INNER_PRODUCT),
    "arga_gd": (False, GCN_STRUCTURE),
    "arvga_gd": (True, GCN_STRUCTURE),
    "arga_ax": (False, GCN_CONTENT),
    "arvga_ax": (True, GCN_CONTENT),
}
# the experiments section spells the structure-decoder variant both ways
VARIANTS["arga_dg"] = VARIANTS["arga_gd"]
VARIANTS["arvga_dg"] = VARIANTS["arvga_gd"]

LOG_STD_CLIP = 10.0


def parse_variant(name: str) -> tuple[bool, str]:
    """Return ``(variational, decoder_kind)`` for a model name such as ``"arvga_ax"``."""
    try:
        return VARIANTS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(VARIANTS)}") from None


class _Weights:
    def on(self, tape: ad.Tape):
        return replace(self, **{
            f.name: tape.var(getattr(self, f.name), name=f.name)
            for f in fields(self) if isinstance(getattr(self, f.name), np.ndarray)
        })

    def arrays(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Var):
                v = v.value
            if isinstance(v, np.ndarray):
                out[f.name] = v
        return out


@dataclass
class EncoderWeights(_Weights):
    w0: object
    w1: object
    w1_sigma: object = None

    @classmethod
    def init(cls, rng, m: int, hidden: int = 32, embed: int = 16, variational: bool = False):
        w0 = ad.glorot_uniform(rng, m, hidden)
        w1 = ad.glorot_uniform(rng, hidden, embed)
        ws = ad.glorot_uniform(rng, hidden, embed) if variational else None
        return cls(w0, w1, ws)


@dataclass
class DecoderWeights(_Weights):
    kind: str = INNER_PRODUCT
    wd1: object = None
    wd2: object = None

    @classmethod
    def init(cls, rng, kind: str, embed: int = 16, hidden: int = 32, out: int = 0):
        if kind == INNER_PRODUCT:
            return cls(kind)
        if kind not in (GCN_STRUCTURE, GCN_CONTENT):
            raise ValueError(f"unknown decoder {kind!r}")
        return cls(kind, ad.glorot_uniform(rng, embed, hidden), ad.glorot_uniform(rng, hidden, out))


@dataclass
class DiscriminatorWeights(_Weights):
    w1: object
    b1: object
    w2: object
    b2: object
    w3: object
    b3: object

    @classmethod
    def init(cls, rng, embed: int = 16, hidden=(16, 64)):
        h1, h2 = hidden
        return cls(
            ad.glorot_uniform(rng, embed, h1), np.zeros((1, h1)),
            ad.glorot_uniform(rng, h1, h2), np.zeros((1, h2)),
            ad.glorot_uniform(rng, h2, 1), np.zeros((1, 1)),
        )


@dataclass
class LatentBatch:
    z: Var
    mu: Var
    log_std: Optional[Var] = None


def as_sparse_features(x) -> sp.csr_matrix:
    return x if sp.issparse(x) else sp.csr_matrix(np.asarray(x, dtype=np.float64))


def encode(p, x, w: EncoderWeights, variational: bool = False, eps=None,
           rng=None, log_std_clip: float | None = LOG_STD_CLIP) -> LatentBatch:
    """Two-layer GCN encoder.

    ``Z1 = relu(P X W0)``, ``mu = P Z1 W1``. For the variational encoder also
    ``log_std = P Z1 W1_sigma`` and ``z = mu + exp(log_std) * eps`` with ``eps``
    standard normal (given, or drawn from ``rng``). ``log_std`` is clipped to
    ``[-log_std_clip, log_std_clip]`` unless the clip is ``None``.
    """
    x = as_sparse_features(x)
    if x.shape[0] != p.shape[0]:
        raise ShapeError(f"features have {x.shape[0]} rows, propagator is {p.shape}")
    if x.shape[1] != w.w0.shape[0]:
        raise ShapeError(f"features have {x.shape[1]} columns, W0 is {w.w0.shape}")
    z1 = ad.relu(ad.spmm(p, ad.spmm(x, w.w0)))
    mu = ad.spmm(p, z1 @ w.w1)
    if not variational:
        return LatentBatch(z=mu, mu=mu)
    if w.w1_sigma is None:
        raise ContractError("variational encoder needs W1_sigma")
    log_std = ad.spmm(p, z1 @ w.w1_sigma)
    if log_std_clip is not None:
        log_std = ad.clip(log_std, -log_std_clip, log_std_clip)
    if eps is None:
        if rng is None:
            raise ContractError("variational encode needs eps or rng")
        eps = rng.standard_normal(mu.shape)
    z = mu + ad.exp(log_std) * eps
    return LatentBatch(z=z, mu=mu, log_std=log_std)


def decode_inner_product(z: Var) -> Var:
    """Edge logits ``z_i . z_j`` for every node pair."""
    return z @ z.T


def decode_gcn(z: Var, p, w: DecoderWeights) -> Var:
    """Two linear GCN layers on the embedding: ``O = P (P Z WD1) WD2``."""
    if w.kind == INNER_PRODUCT:
        raise ContractError("decode_gcn needs a GCN decoder")
    zd = ad.spmm(p, z @ w.wd1)
    return ad.spmm(p, zd @ w.wd2)


def structure_target(adj) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Positive coordinates of ``A + I`` and the ``(pos_weight, norm)`` loss weights."""
    adj = sp.csr_matrix(adj)
    n = adj.shape[0]
    a_tilde = (adj + sp.identity(n, format="csr")).tocoo()
    a_tilde.sum_duplicates()
    total = float(n) * n
    pos = float(a_tilde.nnz)
    if pos >= total:
        raise ContractError("structure loss undefined for a complete graph (A + I has no zeros)")
    return a_tilde.row.astype(np.int64), a_tilde.col.astype(np.int64), (total - pos) / pos, total / (2.0 * (total - pos))


def structure_loss(logits: Var, adj=None, target=None) -> Var:
    """Weighted sigmoid cross-entropy of the n x n ``logits`` against ``A + I``.

    Positive entries are up-weighted by ``(n^2 - nnz)/nnz`` and the mean is
    scaled by ``n^2 / (2 (n^2 - nnz))``. Pass a precomputed ``target`` from
    :func:`structure_target` to skip rebuilding it every epoch.
    """
    rows, cols, pos_weight, norm = target if target is not None else structure_target(adj)
    n = logits.shape[0]
    if logits.shape != (n, n):
        raise ShapeError(f"structure logits must be square, got {logits.shape}")
    return ad.weighted_bce_with_logits(logits, rows, cols, pos_weight, norm)


def inner_product_structure_loss(z: Var, adj=None, target=None) -> Var:
    """``structure_loss(decode_inner_product(z), ...)`` fused; never forms the n x n logits."""
    rows, cols, pos_weight, norm = target if target is not None else structure_target(adj)
    return ad.inner_product_bce(z, rows, cols, pos_weight, norm)


def content_loss(o: Var, x) -> Var:
    """Mean sigmoid cross-entropy between content logits and binary features."""
    x = x.toarray() if sp.issparse(x) else np.asarray(x, dtype=np.float64)
    if not ((x == 0.0) | (x == 1.0)).all():
        raise ContractError("content reconstruction needs binary features")
    return ad.bce_with_logits(o, x)


def kl_loss(mu: Var, log_std: Var, log_std_clip: float | None = LOG_STD_CLIP) -> Var:
    """KL(N(mu, diag sigma^2) || N(0, I)), summed over dimensions, averaged over nodes."""
    if mu.shape != log_std.shape:
        raise ShapeError(f"mu {mu.shape} vs log_std {log_std.shape}")
    if log_std_clip is not None:
        log_std = ad.clip(log_std, -log_std_clip, log_std_clip)
    n = mu.shape[0]
    per_entry = ad.square(mu) * 0.5 + ad.exp(log_std * 2.0) * 0.5 - log_std - 0.5
    return ad.sum(per_entry) * (1.0 / n)


def discriminate(z, w: DiscriminatorWeights) -> Var:
    """MLP logits (batch x 1); probabilities are ``sigmoid`` of these."""
    if z.shape[1] != w.w1.shape[0]:
        raise ShapeError(f"discriminator expects width {w.w1.shape[0]}, got {z.shape[1]}")
    h = ad.relu(z @ w.w1 + w.b1)
    h = ad.relu(h @ w.w2 + w.b2)
    return h @ w.w3 + w.b3


def adversarial_losses(real_logits: Var, fake_logits: Var) -> tuple[Var, Var]:
    """Discriminator and (non-saturating) generator cross-entropies.

    ``real_logits`` score prior samples, ``fake_logits`` score encoder output.
    Returns ``(-1/2 E log D(a) - 1/2 E log(1 - D(z)), -E log D(z))``.
    """
    if real_logits.shape != fake_logits.shape:
        raise ShapeError(f"batch mismatch {real_logits.shape} vs {fake_logits.shape}")
    disc = ad.mean(ad.log_sigmoid(real_logits)) * -0.5 + ad.mean(ad.log_sigmoid(-fake_logits)) * -0.5
    return disc, generator_loss(fake_logits)


def generator_loss(fake_logits: Var) -> Var:
    return -ad.mean(ad.log_sigmoid(fake_logits))
