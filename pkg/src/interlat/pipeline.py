"""
Desk-scale latent-video diffusion trainer hosting the interaction block.

The denoiser is deliberately tiny::

    V_i   = tanh(z_t W_in + b_in + time_embedding(t))
    V_att = V_i + mask(region_latent(V_i))          (if use_ris)
    V_o   = V_att + face_mask * id_attend(V_i, A)   (if use_id)
    eps   = V_o W_out + b_out + z_t W_skip

and is trained for epsilon prediction with the region-amplified loss plus
the weighted orthogonality penalty. Parameters are plain numpy arrays held
in an ordered dict; each step wraps them in fresh tensors, so a step never
mutates anything the tape still references.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import container
from . import tensor as T
from .attention import AttnProjections, MixerConfig, RegionMasks, region_latent, apply_region_mask
from .config import TrainConfig
from .errors import (
    ConfigInvalid,
    DatasetEmpty,
    FormatVersionMismatch,
    IoError,
    NonFiniteError,
    NonFiniteLoss,
    StepOutOfRange,
)
from .id_preserver import IdProjection, fuse_outputs, id_attend, project_embedding
from .latents import InteractionLatents, combined_ortho_loss
from .losses import LatentPair, LossConfig, diffusion_loss, total_loss
from .softquant import QuantConfig
from .synthdata import SynthClip
from .tensor import Tensor

log = logging.getLogger(__name__)

METRICS_VERSION = 1
CHECKPOINT_FILE = "checkpoint.ialt"
METRICS_FILE = "metrics.json"
ABLATION_VARIANTS = {
    "full": {},
    "w/o RIS": {"use_ris": False},
    "w/o quantize": {"use_quantize": False},
    "w/o o-loss": {"use_ortho": False},
    "w/o ID": {"use_id": False},
}


# -- noise schedule -------------------------------------------------------------

class NoiseSchedule:
    """Linear beta schedule with cumulative signal fractions ``alpha_bar``."""

    def __init__(self, T: int = 100, beta_start: float = 1e-4, beta_end: float = 0.02):
        if T < 1 or not 0 < beta_start <= beta_end < 1:
            raise ConfigInvalid(f"invalid schedule T={T}, betas=({beta_start}, {beta_end})")
        self.T = T
        self.betas = np.linspace(beta_start, beta_end, T)
        self.alphas = 1.0 - self.betas
        self.alpha_bar = np.cumprod(self.alphas)

    def check_step(self, t) -> np.ndarray:
        t = np.asarray(t)
        if np.any(t < 0) or np.any(t >= self.T):
            raise StepOutOfRange(f"step {t} outside [0, {self.T})")
        return t


def add_noise(z0, t, eps, sched: NoiseSchedule):
    """``sqrt(abar_t) z0 + sqrt(1 - abar_t) eps``; ``t`` is a step or one step per sample."""
    is_tensor = isinstance(z0, Tensor)
    z0 = np.asarray(getattr(z0, "data", z0))
    eps = np.asarray(getattr(eps, "data", eps))
    if z0.shape != eps.shape:
        raise ValueError(f"noise shape {eps.shape} != latent shape {z0.shape}")
    t = sched.check_step(t)
    ab = sched.alpha_bar[t]
    if ab.ndim:
        ab = ab.reshape(ab.shape + (1,) * (z0.ndim - ab.ndim))
    zt = np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps
    return Tensor(zt) if is_tensor else zt


def predict_x0(zt, t, eps_hat, sched: NoiseSchedule) -> np.ndarray:
    """One-step estimate of the clean latent from a noise prediction."""
    ab = sched.alpha_bar[sched.check_step(t)]
    if ab.ndim:
        ab = ab.reshape(ab.shape + (1,) * (np.ndim(zt) - ab.ndim))
    return (np.asarray(zt) - np.sqrt(1.0 - ab) * np.asarray(eps_hat)) / np.sqrt(ab)


def timestep_features(t, d: int, T: int) -> np.ndarray:
    """Sinusoidal embedding of the step index, shape ``(len(t), d)``."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = (d + 1) // 2
    freqs = np.exp(-np.log(float(T)) * np.arange(half) / half)
    ang = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)[:, :d]


# -- model ------------------------------------------------------------------------

@dataclass(frozen=True)
class AblationFlags:
    use_ris: bool = True
    use_quantize: bool = True
    use_ortho: bool = True
    use_id: bool = True

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> AblationFlags:
        return cls(cfg.use_ris, cfg.use_quantize, cfg.use_ortho, cfg.use_id)

    @classmethod
    def none(cls) -> AblationFlags:
        return cls(False, False, False, False)


class ToyDenoiser:
    """Epsilon-prediction network; parameters live in ``self.params`` (name -> array).

    Every parameter is drawn regardless of the ablation flags so that
    variants trained from the same seed share their common weights.
    """

    def __init__(self, cfg: TrainConfig, params: dict[str, np.ndarray] | None = None):
        self.cfg = cfg
        self.params = params if params is not None else self._init_params(cfg)

    @staticmethod
    def _init_params(cfg: TrainConfig) -> dict[str, np.ndarray]:
        rng = np.random.default_rng(cfg.seed)
        c, d = cfg.c, cfg.d
        p = {
            "w_in": rng.standard_normal((c, d)) / np.sqrt(c),
            "b_in": np.zeros(d),
            "w_time": rng.standard_normal((d, d)) * (0.5 / np.sqrt(d)),
            "w_out": rng.standard_normal((d, c)) * (0.1 / np.sqrt(d)),
            "b_out": np.zeros(c),
            "w_skip": np.zeros((c, c)),
            "latents.spatial": rng.standard_normal((cfg.n, d)) * cfg.latent_init_scale,
            "latents.temporal": rng.standard_normal((cfg.m, d)) * cfg.latent_init_scale,
        }
        idp = IdProjection.init(cfg.d_face, d, rng, two_layer=cfg.id_two_layer)
        for k, v in idp.parameters().items():
            p[f"id.{k}"] = np.array(v.data)
        if cfg.attn_projections:
            proj = AttnProjections.init(d, rng, scale=0.1)
            p.update({"attn.wq": np.array(proj.wq.data), "attn.wk": np.array(proj.wk.data),
                      "attn.wv": np.array(proj.wv.data)})
        return p

    def parameter_count(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def tensors(self, requires_grad: bool = False) -> dict[str, Tensor]:
        return {k: Tensor(v, requires_grad) for k, v in self.params.items()}

    def copy(self) -> ToyDenoiser:
        return ToyDenoiser(self.cfg, {k: v.copy() for k, v in self.params.items()})


@dataclass
class Batch:
    z0: np.ndarray         # (b, f, h, w, c)
    masks: RegionMasks     # (b, f, h, w, 1)
    identity: np.ndarray   # (b, d_face)

    @classmethod
    def from_clips(cls, clips: list[SynthClip]) -> Batch:
        return cls(np.stack([c.frames for c in clips]),
                   RegionMasks(np.stack([c.hand_mask for c in clips]),
                               np.stack([c.face_mask for c in clips])),
                   np.stack([c.identity for c in clips]))


def _latents(P: dict[str, Tensor]) -> InteractionLatents:
    return InteractionLatents(P["latents.spatial"], P["latents.temporal"])


def _id_projection(P: dict[str, Tensor]) -> IdProjection:
    return IdProjection(P["id.weights"], P["id.bias"], P.get("id.w1"), P.get("id.b1"))


def _attn_proj(P: dict[str, Tensor]) -> AttnProjections | None:
    if "attn.wq" not in P:
        return None
    return AttnProjections(P["attn.wq"], P["attn.wk"], P["attn.wv"])


def denoise_step(model: ToyDenoiser, z_t, t, masks: RegionMasks, face_emb,
                 flags: AblationFlags | None = None, params: dict[str, Tensor] | None = None) -> Tensor:
    """Predict the noise in ``z_t``.

    ``face_emb`` holds one identity row per sample ``(b, d_face)`` or
    several ``(b, e, d_face)``. ``params`` lets a caller supply tensors that
    take part in a tape; by default the model's arrays are used as constants.
    """
    cfg = model.cfg
    flags = flags or AblationFlags.from_config(cfg)
    P = params if params is not None else model.tensors()
    zt = z_t if isinstance(z_t, Tensor) else Tensor(z_t)
    b = zt.shape[0]
    t = np.broadcast_to(np.asarray(t), (b,))
    temb = Tensor(timestep_features(t, cfg.d, cfg.T)) @ P["w_time"]
    h = zt @ P["w_in"] + P["b_in"] + temb.reshape(b, 1, 1, 1, cfg.d)
    Vi = T.tanh(h)
    Vo = Vi
    if flags.use_ris:
        Vl = region_latent(Vi, _latents(P), QuantConfig(cfg.tau), MixerConfig(cfg.alpha, cfg.mask_combine),
                           quantize=flags.use_quantize, proj=_attn_proj(P))
        Vo = Vi + apply_region_mask(Vl, masks, cfg.mask_combine)
    if flags.use_id:
        A = np.asarray(getattr(face_emb, "data", face_emb))
        A = A.reshape(b, -1, A.shape[-1])
        e = A.shape[1]
        emb = project_embedding(Tensor(A.reshape(b * e, -1)), _id_projection(P)).reshape(b, e, cfg.d)
        Vo = fuse_outputs(Vo, id_attend(Vi, emb, masks, cfg.alpha, _attn_proj(P)))
    return Vo @ P["w_out"] + P["b_out"] + zt @ P["w_skip"]


def compute_losses(model: ToyDenoiser, batch: Batch, t, eps, params: dict[str, Tensor] | None = None,
                   flags: AblationFlags | None = None):
    """Return ``(total, diff, ortho, eps_hat)`` tensors for one batch."""
    cfg = model.cfg
    flags = flags or AblationFlags.from_config(cfg)
    P = params if params is not None else model.tensors()
    sched = NoiseSchedule(cfg.T, cfg.beta_start, cfg.beta_end)
    zt = add_noise(batch.z0, t, eps, sched)
    eps_hat = denoise_step(model, zt, t, batch.masks, batch.identity, flags, P)
    lcfg = LossConfig(cfg.lambda_hand, cfg.lambda_face, cfg.beta, cfg.weighted_mean)
    diff = diffusion_loss(LatentPair(Tensor(eps), eps_hat, batch.masks), lcfg)
    ortho = combined_ortho_loss(_latents(P), cfg.ortho_normalize)
    beta = cfg.beta if (flags.use_ris and flags.use_ortho) else 0.0
    return total_loss(diff, ortho, beta), diff, ortho, eps_hat


# -- optimisation --------------------------------------------------------------------

class Optimizer:
    """SGD, or Adam when ``kind == 'adam'``; state arrays are checkpointed."""

    def __init__(self, kind: str, lr: float, params: dict[str, np.ndarray],
                 betas=(0.9, 0.999), eps=1e-8):
        self.kind, self.lr, self.betas, self.eps = kind, lr, betas, eps
        self.t = 0
        self.state: dict[str, np.ndarray] = {}
        if kind == "adam":
            for k, v in params.items():
                self.state[f"m.{k}"] = np.zeros_like(v)
                self.state[f"v.{k}"] = np.zeros_like(v)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        if self.lr == 0:
            return
        for k, g in grads.items():
            if self.kind == "sgd":
                params[k] = params[k] - self.lr * g
                continue
            b1, b2 = self.betas
            m = self.state[f"m.{k}"] = b1 * self.state[f"m.{k}"] + (1 - b1) * g
            v = self.state[f"v.{k}"] = b2 * self.state[f"v.{k}"] + (1 - b2) * g * g
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            params[k] = params[k] - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _step_rng(seed: int, step: int) -> np.random.Generator:
    return np.random.default_rng([seed, 1, step])


def sample_batch(clips, cfg: TrainConfig, step: int):
    rng = _step_rng(cfg.seed, step)
    idx = rng.choice(len(clips), size=cfg.b, replace=len(clips) < cfg.b)
    batch = Batch.from_clips([clips[i] for i in idx])
    t = rng.integers(0, cfg.T, size=cfg.b)
    eps = rng.standard_normal(batch.z0.shape)
    return batch, t, eps


def probe_batch(clips, cfg: TrainConfig):
    """Fixed evaluation batch (every clip, seeded steps and noise) used to report progress."""
    rng = np.random.default_rng([cfg.seed, 2])
    batch = Batch.from_clips(list(clips))
    t = rng.integers(0, cfg.T, size=len(clips))
    eps = rng.standard_normal(batch.z0.shape)
    return batch, t, eps


def evaluate(model: ToyDenoiser, batch: Batch, t, eps, flags: AblationFlags | None = None) -> dict:
    total, diff, ortho, eps_hat = compute_losses(model, batch, t, eps, flags=flags)
    cfg = model.cfg
    sched = NoiseSchedule(cfg.T, cfg.beta_start, cfg.beta_end)
    zt = add_noise(batch.z0, t, eps, sched)
    x0 = predict_x0(zt, t, eps_hat.data, sched)
    region = np.maximum(batch.masks.hand, batch.masks.face)
    sq = (x0 - batch.z0) ** 2 * region
    return {"total": total.item(), "diff": diff.item(), "ortho": ortho.item(),
            "region_recon_mse": float(sq.sum() / (region.sum() * batch.z0.shape[-1]))}


# -- checkpoints -----------------------------------------------------------------------

def save_checkpoint(path, model: ToyDenoiser, optimizer: Optimizer | None = None, step: int = 0,
                    loss_history=()) -> None:
    entries = {f"param/{k}": v for k, v in model.params.items()}
    if optimizer is not None:
        entries.update({f"opt/{k}": v for k, v in optimizer.state.items()})
    entries["meta/step"] = np.array([float(step)])
    entries["meta/loss_history"] = np.asarray(loss_history, dtype=np.float64).reshape(-1)
    container.write(path, entries)


def load_checkpoint(path, cfg: TrainConfig | None = None):
    """Return ``(params, opt_state, step, loss_history)``; validates names against ``cfg``."""
    raw = container.read(path)
    params = {k[6:]: v for k, v in raw.items() if k.startswith("param/")}
    opt = {k[4:]: v for k, v in raw.items() if k.startswith("opt/")}
    try:
        step = int(raw["meta/step"][0])
        history = list(raw["meta/loss_history"])
    except KeyError as exc:
        raise FormatVersionMismatch(f"checkpoint missing {exc}") from None
    if cfg is not None:
        expected = ToyDenoiser._init_params(cfg)
        if set(expected) != set(params) or any(expected[k].shape != params[k].shape for k in expected):
            raise ConfigInvalid("checkpoint parameters do not match the configuration")
    return params, opt, step, history


# -- training --------------------------------------------------------------------------

@dataclass
class TrainResult:
    model: ToyDenoiser
    metrics: dict
    checkpoint: Path | None


def train(cfg: TrainConfig, clips: list[SynthClip], out_dir=None, resume_from=None,
          stop_after: int | None = None) -> TrainResult:
    """Run ``cfg.steps`` optimizer steps on the total loss.

    ``resume_from`` continues a run from a checkpoint. ``stop_after``
    interrupts after that many global steps (the checkpoint then records
    where to resume).
    """
    if not clips:
        raise DatasetEmpty("no training clips")
    clip = clips[0]
    if clip.frames.shape != (cfg.f, cfg.h, cfg.w, cfg.c) or clip.identity.shape != (cfg.d_face,):
        raise ConfigInvalid(f"clip shape {clip.frames.shape} does not match config dims")
    start_time = time.perf_counter()
    model = ToyDenoiser(cfg)
    opt = Optimizer(cfg.optimizer, cfg.lr, model.params)
    history: list[float] = []
    start = 0
    if resume_from is not None:
        params, state, start, history = load_checkpoint(resume_from, cfg)
        model.params = params
        opt.state.update(state)
        opt.t = start
    flags = AblationFlags.from_config(cfg)
    probe = probe_batch(clips, cfg)
    initial = evaluate(model if resume_from is None else ToyDenoiser(cfg), *probe, flags=flags)
    end = cfg.steps if stop_after is None else min(cfg.steps, stop_after)
    step = start
    for step in range(start, end):
        batch, t, eps = sample_batch(clips, cfg, step)
        P = model.tensors(requires_grad=True)
        try:
            total, diff, ortho, _ = compute_losses(model, batch, t, eps, P, flags)
        except NonFiniteError as exc:
            raise NonFiniteLoss(step, str(exc)) from exc
        loss = total.item()
        if not np.isfinite(loss):
            raise NonFiniteLoss(step, loss)
        total.backward()
        grads = {k: v.grad.data for k, v in P.items() if v.grad is not None}
        opt.step(model.params, grads)
        history.append(loss)
        if step % 50 == 0:
            log.debug("step %d total %.6f diff %.6f ortho %.3e", step, loss, diff.item(), ortho.item())
    final = evaluate(model, *probe, flags=flags)
    metrics = {
        "version": METRICS_VERSION,
        "config_digest": cfg.digest(),
        "config": cfg.to_dict(),
        "steps": len(history),
        "per_step_losses": history,
        "initial": initial,
        "final": final,
        "wall_time": time.perf_counter() - start_time,
    }
    ckpt = None
    if out_dir is not None:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoError(f"cannot create {out}: {exc}") from exc
        ckpt = out / CHECKPOINT_FILE
        save_checkpoint(ckpt, model, opt, len(history), history)
        write_json(out / METRICS_FILE, metrics)
    return TrainResult(model, metrics, ckpt)


def write_json(path, obj) -> None:
    try:
        Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def ablate(cfg: TrainConfig, clips: list[SynthClip], out_dir=None) -> dict:
    """Train the five ablation variants from one seed and compare them."""
    report = {"version": METRICS_VERSION, "config_digest": cfg.digest(), "steps": cfg.steps,
              "variants": {}}
    for name, change in ABLATION_VARIANTS.items():
        vcfg = cfg.replace(**change)
        res = train(vcfg, clips)
        final = res.metrics["final"]
        report["variants"][name] = {
            "config_digest": vcfg.digest(),
            "steps": res.metrics["steps"],
            "final_total": final["total"],
            "final_diff": final["diff"],
            "final_ortho": final["ortho"],
            "region_recon_mse": final["region_recon_mse"],
        }
        log.info("%s: region mse %.5f ortho %.3e", name, final["region_recon_mse"], final["ortho"])
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        write_json(Path(out_dir) / "ablation.json", report)
    return report
