"""Joint training of graph autoencoder and discriminator (Adam), checkpoints."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import NumericError
from .graph import EdgeSplit, Graph, adjacency_from_edges, build_propagator
from .models import (
    GCN_CONTENT,
    GCN_STRUCTURE,
    DecoderWeights,
    DiscriminatorWeights,
    EncoderWeights,
    adversarial_losses,
    content_loss,
    decode_gcn,
    discriminate,
    encode,
    generator_loss,
    inner_product_structure_loss,
    kl_loss,
    parse_variant,
    structure_loss,
    structure_target,
)

log = logging.getLogger(__name__)

PRIORS = ("gaussian", "uniform")
KL_SCALES = ("elbo", "per_node")
CHECKPOINT_FORMAT = "argem-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    variant: str = "arga"
    prior: str = "gaussian"
    epochs: int = 200
    disc_steps: int = 1
    lr: float = 0.001
    disc_lr: float = 0.001
    hidden: int = 32
    embed: int = 16
    disc_hidden: tuple = (16, 64)
    batch: Optional[int] = None  # rows per discriminator step; None = all nodes
    seed: int = 0
    adv_weight: float = 1.0
    log_std_clip: Optional[float] = 10.0
    # "elbo": KL enters as kl_loss / n, the weight it has relative to the per-entry
    # reconstruction mean when the summed lower bound is divided by n^2.
    # "per_node": kl_loss added as is.
    kl_scale: str = "elbo"

    def __post_init__(self):
        parse_variant(self.variant)
        self.variant = self.variant.lower()
        self.prior = self.prior.lower()
        self.disc_hidden = tuple(int(h) for h in self.disc_hidden)
        if self.prior not in PRIORS:
            raise ValueError(f"prior must be one of {PRIORS}, got {self.prior!r}")
        if self.epochs < 1 or self.disc_steps < 1:
            raise ValueError("epochs and disc_steps must be >= 1")
        if self.lr <= 0 or self.disc_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.embed < 1 or self.hidden < 1:
            raise ValueError("layer widths must be >= 1")
        if self.batch is not None and self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.kl_scale not in KL_SCALES:
            raise ValueError(f"kl_scale must be one of {KL_SCALES}, got {self.kl_scale!r}")
        if len(self.disc_hidden) != 2:
            raise ValueError("disc_hidden takes exactly two widths")

    @classmethod
    def for_dataset(cls, name: str, **overrides) -> "TrainConfig":
        """Defaults used in the experiments: 2000 epochs and disc_lr 0.008 on PubMed."""
        base = {}
        if name.lower() == "pubmed":
            base = {"epochs": 2000, "disc_lr": 0.008}
        base.update(overrides)
        return cls(**base)

    @property
    def variational(self) -> bool:
        return parse_variant(self.variant)[0]

    @property
    def decoder(self) -> str:
        return parse_variant(self.variant)[1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["disc_hidden"] = list(self.disc_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict, lr: float) -> dict:
    """One bias-corrected Adam update; returns new parameter arrays."""
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for parameter {name!r}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    out = dict(params)
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ad.ShapeError(f"gradient for {name!r} has shape {g.shape}, parameter {p.shape}")
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        state.m[name], state.v[name] = m, v
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        out[name] = p - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out


def sample_prior(prior: str, m: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``m x d`` draws from N(0, 1) or U(-1, 1)."""
    if m < 1 or d < 1:
        raise ValueError("sample sizes must be >= 1")
    if prior == "gaussian":
        return rng.standard_normal((m, d))
    if prior == "uniform":
        return rng.uniform(-1.0, 1.0, size=(m, d))
    raise ValueError(f"unknown prior {prior!r}")


@dataclass
class ModelWeights:
    encoder: EncoderWeights
    decoder: DecoderWeights
    discriminator: DiscriminatorWeights

    def flat(self) -> dict:
        out = {}
        for prefix, part in (("enc", self.encoder), ("dec", self.decoder), ("disc", self.discriminator)):
            for k, v in part.arrays().items():
                out[f"{prefix}.{k}"] = v
        return out


@dataclass
class TrainingData:
    """Everything the loop needs that is derived from the training graph once."""

    propagator: sp.csr_matrix
    features: sp.csr_matrix
    dense_features: np.ndarray
    target: tuple

    @classmethod
    def build(cls, g: Graph, split: Optional[EdgeSplit] = None) -> "TrainingData":
        edges = g.edges if split is None else split.train_edges
        adj = adjacency_from_edges(g.n, edges)
        return cls(
            propagator=build_propagator(adj),
            features=sp.csr_matrix(g.features),
            dense_features=g.features,
            target=structure_target(adj),
        )


@dataclass
class TrainedModel:
    config: TrainConfig
    weights: ModelWeights
    embedding: np.ndarray
    history: dict


def init_weights(cfg: TrainConfig, n: int, m: int, rng: np.random.Generator) -> ModelWeights:
    enc = EncoderWeights.init(rng, m, cfg.hidden, cfg.embed, cfg.variational)
    out = n if cfg.decoder == GCN_STRUCTURE else m
    dec = DecoderWeights.init(rng, cfg.decoder, cfg.embed, cfg.hidden, out)
    disc = DiscriminatorWeights.init(rng, cfg.embed, cfg.disc_hidden)
    return ModelWeights(enc, dec, disc)


def embed(weights: ModelWeights, data: TrainingData, cfg: TrainConfig) -> np.ndarray:
    """Deterministic embedding: the encoder mean (``Z`` itself for non-variational models)."""
    tape = ad.Tape()
    lat = encode(data.propagator, data.features, weights.encoder.on(tape),
                 variational=cfg.variational, eps=0.0, log_std_clip=cfg.log_std_clip)
    return lat.mu.value.copy()


def reconstruction(lat, dec, data: TrainingData, cfg: TrainConfig):
    """Reconstruction loss for the configured decoder; returns ``(loss, parts)``."""
    if cfg.decoder == GCN_STRUCTURE:
        loss = structure_loss(decode_gcn(lat.z, data.propagator, dec), target=data.target)
        return loss, {"recon_a": float(loss.value)}
    la = inner_product_structure_loss(lat.z, target=data.target)
    if cfg.decoder == GCN_CONTENT:
        lx = content_loss(decode_gcn(lat.z, data.propagator, dec), data.dense_features)
        return la + lx, {"recon_a": float(la.value), "recon_x": float(lx.value)}
    return la, {"recon_a": float(la.value)}


def discriminator_step(weights: ModelWeights, state: AdamState, z: np.ndarray,
                       cfg: TrainConfig, rng: np.random.Generator) -> tuple[ModelWeights, float]:
    """Sample ``batch`` embedding rows and prior vectors, take one Adam step on the discriminator.

    ``z`` is a plain array, so nothing flows back into encoder or decoder.
    """
    n = z.shape[0]
    m = n if cfg.batch is None else min(cfg.batch, n)
    idx = np.arange(n) if m == n else rng.choice(n, size=m, replace=False)
    real = sample_prior(cfg.prior, m, z.shape[1], rng)
    tape = ad.Tape()
    dw = weights.discriminator.on(tape)
    d_loss, _ = adversarial_losses(discriminate(tape.constant(real), dw), discriminate(tape.constant(z[idx]), dw))
    tape.backward(d_loss)
    grads = {k: getattr(dw, k).grad for k in dw.arrays()}
    new = adam_step(state, weights.discriminator.arrays(), grads, cfg.disc_lr)
    return ModelWeights(weights.encoder, weights.decoder, DiscriminatorWeights(**new)), float(d_loss.value)


def train(g: Graph, split: Optional[EdgeSplit], cfg: TrainConfig, data: Optional[TrainingData] = None,
          callback=None) -> TrainedModel:
    """Run ``cfg.epochs`` rounds of: encode, ``cfg.disc_steps`` discriminator updates,
    one autoencoder update on reconstruction (+ KL) + ``adv_weight`` x generator loss.

    Only ``split.train_edges`` enter the propagator and the structure target.
    ``history["kl"]`` logs the per-node KL; see ``TrainConfig.kl_scale`` for the
    weight it carries in the loss.
    Randomness comes from three independent streams derived from ``cfg.seed``
    (initialisation, reparameterisation noise, adversarial sampling), so e.g.
    switching the adversarial term off leaves the autoencoder's noise untouched.
    """
    if data is None:
        data = TrainingData.build(g, split)
    init_seq, noise_seq, adv_seq = np.random.SeedSequence(cfg.seed).spawn(3)
    init_rng, noise_rng, adv_rng = (np.random.default_rng(s) for s in (init_seq, noise_seq, adv_seq))
    weights = init_weights(cfg, g.n, g.m, init_rng)
    ae_state, disc_state = AdamState(), AdamState()
    history = {k: [] for k in ("loss", "recon", "kl", "disc", "gen")}
    use_adv = cfg.adv_weight != 0.0

    for epoch in range(cfg.epochs):
        try:
            eps = noise_rng.standard_normal((g.n, cfg.embed)) if cfg.variational else None
            tape = ad.Tape()
            enc = weights.encoder.on(tape)
            dec = weights.decoder.on(tape)
            lat = encode(data.propagator, data.features, enc, cfg.variational, eps=eps,
                         log_std_clip=cfg.log_std_clip)
            loss, _ = reconstruction(lat, dec, data, cfg)
            recon = float(loss.value)
            kl = 0.0
            if cfg.variational:
                kl_term = kl_loss(lat.mu, lat.log_std, cfg.log_std_clip)
                kl = float(kl_term.value)
                loss = loss + (kl_term * (1.0 / g.n) if cfg.kl_scale == "elbo" else kl_term)

            z_now = lat.z.value
            d_losses = []
            for _ in range(cfg.disc_steps):
                weights, d = discriminator_step(weights, disc_state, z_now, cfg, adv_rng)
                d_losses.append(d)

            # discriminator enters as constants: frozen during the autoencoder step
            dw = weights.discriminator
            frozen = DiscriminatorWeights(**{k: tape.constant(v) for k, v in dw.arrays().items()})
            gen = generator_loss(discriminate(lat.z, frozen))
            if use_adv:
                loss = loss + gen * cfg.adv_weight
            tape.backward(loss)
        except NumericError as exc:
            raise NumericError(f"training diverged at epoch {epoch}: {exc}") from exc

        params = {f"enc.{k}": v.grad for k, v in vars(enc).items() if isinstance(v, ad.Var)}
        params.update({f"dec.{k}": v.grad for k, v in vars(dec).items() if isinstance(v, ad.Var)})
        current = {f"enc.{k}": v for k, v in weights.encoder.arrays().items()}
        current.update({f"dec.{k}": v for k, v in weights.decoder.arrays().items()})
        try:
            updated = adam_step(ae_state, current, params, cfg.lr)
        except NumericError as exc:
            raise NumericError(f"training diverged at epoch {epoch}: {exc}") from exc
        weights = ModelWeights(
            EncoderWeights(**{k[4:]: v for k, v in updated.items() if k.startswith("enc.")}),
            DecoderWeights(weights.decoder.kind, **{k[4:]: v for k, v in updated.items() if k.startswith("dec.")}),
            weights.discriminator,
        )
        history["loss"].append(float(loss.value))
        history["recon"].append(recon)
        history["kl"].append(kl)
        history["disc"].append(float(np.mean(d_losses)))
        history["gen"].append(float(gen.value))
        if callback is not None:
            callback(epoch, weights, history)

    return TrainedModel(cfg, weights, embed(weights, data, cfg), history)


# -- checkpoints ------------------------------------------------------------

def save_checkpoint(path, model: TrainedModel, split: Optional[EdgeSplit] = None,
                    node_ids=None, extra: Optional[dict] = None) -> Path:
    """Write config, weights, embedding (and optionally the split) to one ``.npz``."""
    path = Path(path)
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "decoder": model.weights.decoder.kind,
        "history": model.history,
        "extra": extra or {},
    }
    arrays = {f"w/{k}": v for k, v in model.weights.flat().items()}
    arrays["embedding"] = model.embedding
    if split is not None:
        for k in ("train_edges", "val_pos", "val_neg", "test_pos", "test_neg"):
            arrays[f"split/{k}"] = getattr(split, k)
        meta["split_seed"] = split.seed
    if node_ids is not None:
        arrays["node_ids"] = np.asarray(node_ids, dtype=str)
    arrays["meta"] = np.asarray(json.dumps(meta))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


@dataclass
class Checkpoint:
    model: TrainedModel
    split: Optional[EdgeSplit]
    node_ids: Optional[list]
    meta: dict


def load_checkpoint(path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path} is not an argem checkpoint")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        arrays = {k: z[k] for k in z.files}
    cfg = TrainConfig.from_dict(meta["config"])
    parts = {"enc": {}, "dec": {}, "disc": {}}
    for k, v in arrays.items():
        if k.startswith("w/"):
            prefix, name = k[2:].split(".", 1)
            parts[prefix][name] = v
    weights = ModelWeights(
        EncoderWeights(**parts["enc"]),
        DecoderWeights(meta["decoder"], **parts["dec"]),
        DiscriminatorWeights(**parts["disc"]),
    )
    split = None
    if "split/test_pos" in arrays:
        split = EdgeSplit(**{k: arrays[f"split/{k}"] for k in
                             ("train_edges", "val_pos", "val_neg", "test_pos", "test_neg")},
                          seed=meta.get("split_seed", 0))
    node_ids = arrays["node_ids"].tolist() if "node_ids" in arrays else None
    model = TrainedModel(cfg, weights, arrays["embedding"], meta["history"])
    return Checkpoint(model, split, node_ids, meta)
