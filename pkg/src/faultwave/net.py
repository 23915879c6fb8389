"""Multi-scale convolutional time-series classifier with a full numpy
training loop.

Each module runs a 1x1 bottleneck, three parallel same-padded 1-D
convolutions at kernel sizes {k, k/2, k/4}, and a maxpool(3)+1x1 branch,
concatenated and passed through ReLU; a linear shortcut joins in every
residual_every modules. Global average pooling feeds a dense softmax head.
No batch normalization: bias terms keep per-sample outputs independent of
batch composition. Weights are Glorot-uniform from the config seed,
training is mini-batch Adam on categorical cross-entropy.

An N x N image is consumed as N channels by N time steps (row = channel).

Parameter count closed form (documented for verification): with input
channels C0 = N, per-branch filters f, bottleneck b, kernels (k1, k2, k3),
module input C (C0 for the first module, 4f after):
    bottleneck  C*b + b
    branches    sum_j (b*f*kj + f)
    pool branch C*f + f
each shortcut adds C_block_in*4f + 4f, and the head adds 4f*c + c.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .imaging import ImageTensor

_MAGIC = b"FWNET001"


class TrainingDivergedError(RuntimeError):
    """Raised when the loss turns NaN/Inf during training."""


@dataclass(frozen=True)
class NetConfig:
    depth: int = 2
    residual_every: int = 3
    n_filters: int = 8
    base_kernel: int = 12
    bottleneck: int = 8
    n_classes: int = 2
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    use_residual: bool = True
    ensemble: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.residual_every < 1:
            raise ValueError("residual_every must be >= 1")
        if self.n_filters < 1 or self.bottleneck < 1:
            raise ValueError("filter counts must be >= 1")
        if self.base_kernel < 1:
            raise ValueError("base kernel must be >= 1")
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("invalid training schedule")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if self.ensemble < 1:
            raise ValueError("ensemble size must be >= 1")

    @property
    def kernel_sizes(self) -> tuple[int, int, int]:
        k = self.base_kernel
        return (k, max(k // 2, 1), max(k // 4, 1))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "depth", "residual_every", "n_filters", "base_kernel", "bottleneck",
            "n_classes", "epochs", "batch_size", "learning_rate", "use_residual",
            "ensemble", "seed")}


@dataclass
class ModelState:
    """Weights, Adam moments, step counter, and the training rng."""

    cfg: NetConfig
    in_channels: int
    seq_len: int
    params: dict
    adam_m: dict
    adam_v: dict
    step: int
    rng_state: dict

    def parameter_names(self) -> list[str]:
        return sorted(self.params.keys())

    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _module_channels(cfg: NetConfig, index: int, in_channels: int) -> int:
    return in_channels if index == 0 else 4 * cfg.n_filters


def build(cfg: NetConfig, in_channels: int, seq_len: int) -> ModelState:
    """Initialize a model for (in_channels, seq_len) inputs."""
    if in_channels < 1 or seq_len < 1:
        raise ValueError("input shape must be positive")
    rng = np.random.default_rng(cfg.seed)
    params: dict = {}
    kers = cfg.kernel_sizes
    f, b = cfg.n_filters, cfg.bottleneck
    block_in_channels = in_channels
    for i in range(cfg.depth):
        c_in = _module_channels(cfg, i, in_channels)
        params[f"mod{i}_bottleneck_w"] = _glorot(rng, (b, c_in, 1), c_in, b)
        params[f"mod{i}_bottleneck_b"] = np.zeros(b)
        for j, k in enumerate(kers):
            params[f"mod{i}_conv{j}_w"] = _glorot(rng, (f, b, k), b * k, f * k)
            params[f"mod{i}_conv{j}_b"] = np.zeros(f)
        params[f"mod{i}_pool_w"] = _glorot(rng, (f, c_in, 1), c_in, f)
        params[f"mod{i}_pool_b"] = np.zeros(f)
        if cfg.use_residual and (i + 1) % cfg.residual_every == 0:
            params[f"res{i}_w"] = _glorot(rng, (4 * f, block_in_channels, 1), block_in_channels, 4 * f)
            params[f"res{i}_b"] = np.zeros(4 * f)
            block_in_channels = 4 * f
    params["head_w"] = _glorot(rng, (cfg.n_classes, 4 * f), 4 * f, cfg.n_classes)
    params["head_b"] = np.zeros(cfg.n_classes)
    zeros = {k: np.zeros_like(v) for k, v in params.items()}
    return ModelState(cfg=cfg, in_channels=in_channels, seq_len=seq_len, params=params,
                      adam_m=zeros, adam_v={k: np.zeros_like(v) for k, v in params.items()},
                      step=0, rng_state=np.random.default_rng(cfg.seed + 1).bit_generator.state)


def _conv1d_same(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Same-padded stride-1 conv: x (B,C,T), w (F,C,K) -> y (B,F,T); returns (y, padded x)."""
    k = w.shape[2]
    pl = (k - 1) // 2
    pr = k - 1 - pl
    xp = np.pad(x, ((0, 0), (0, 0), (pl, pr)))
    t = x.shape[2]
    y = np.zeros((x.shape[0], w.shape[0], t))
    for kk in range(k):
        y += np.einsum("bct,fc->bft", xp[:, :, kk:kk + t], w[:, :, kk], optimize=True)
    return y + bias[None, :, None], xp


def _conv1d_same_backward(dy: np.ndarray, xp: np.ndarray, w: np.ndarray,
                          t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients for _conv1d_same; returns (dx, dw, db)."""
    k = w.shape[2]
    pl = (k - 1) // 2
    dw = np.empty_like(w)
    dxp = np.zeros_like(xp)
    for kk in range(k):
        dw[:, :, kk] = np.einsum("bft,bct->fc", dy, xp[:, :, kk:kk + t], optimize=True)
        dxp[:, :, kk:kk + t] += np.einsum("bft,fc->bct", dy, w[:, :, kk], optimize=True)
    db = dy.sum(axis=(0, 2))
    dx = dxp[:, :, pl:pl + t]
    return dx, dw, db


def _maxpool3_same(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Window-3 stride-1 same-padded max pool; returns (y, argmax offsets)."""
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1)), constant_values=-np.inf)
    t = x.shape[2]
    stack = np.stack([xp[:, :, o:o + t] for o in range(3)])
    arg = np.argmax(stack, axis=0)
    y = np.take_along_axis(stack, arg[None], axis=0)[0]
    return y, arg


def _maxpool3_same_backward(dy: np.ndarray, arg: np.ndarray, t: int) -> np.ndarray:
    dxp = np.zeros((dy.shape[0], dy.shape[1], t + 2))
    for o in range(3):
        mask = arg == o
        np.add.at(dxp[:, :, o:o + t], np.nonzero(mask), dy[mask])
    return dxp[:, :, 1:1 + t]


def _forward(model: ModelState, x: np.ndarray, keep_cache: bool = False):
    """Forward pass over a batch (B, C, T); returns (probs, caches)."""
    cfg = model.cfg
    p = model.params
    caches = []
    block_in = x
    cur = x
    for i in range(cfg.depth):
        cache: dict = {"x": cur}
        zb, xp_b = _conv1d_same(cur, p[f"mod{i}_bottleneck_w"], p[f"mod{i}_bottleneck_b"])
        branches = []
        xps = []
        for j in range(3):
            yj, xp_j = _conv1d_same(zb, p[f"mod{i}_conv{j}_w"], p[f"mod{i}_conv{j}_b"])
            branches.append(yj)
            xps.append(xp_j)
        pooled, arg = _maxpool3_same(cur)
        ypool, xp_p = _conv1d_same(pooled, p[f"mod{i}_pool_w"], p[f"mod{i}_pool_b"])
        cat = np.concatenate(branches + [ypool], axis=1)
        out = np.maximum(cat, 0.0)
        cache.update(xp_b=xp_b, zb=zb, xps=xps, arg=arg, xp_p=xp_p, relu1=out > 0)
        if cfg.use_residual and (i + 1) % cfg.residual_every == 0:
            shortcut, xp_r = _conv1d_same(block_in, p[f"res{i}_w"], p[f"res{i}_b"])
            summed = out + shortcut
            out = np.maximum(summed, 0.0)
            cache.update(block_in=block_in, xp_r=xp_r, relu2=summed > 0)
            block_in = out
        caches.append(cache)
        cur = out
    gap = cur.mean(axis=2)
    logits = gap @ p["head_w"].T + p["head_b"]
    shifted = logits - logits.max(axis=1, keepdims=True)
    expv = np.exp(shifted)
    probs = expv / expv.sum(axis=1, keepdims=True)
    if not keep_cache:
        return probs, None
    return probs, {"modules": caches, "gap": gap, "last": cur}


def _backward(model: ModelState, x: np.ndarray, probs: np.ndarray, onehot: np.ndarray,
              cache: dict) -> dict:
    """Gradients of mean cross-entropy w.r.t. every parameter."""
    cfg = model.cfg
    p = model.params
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    batch = x.shape[0]
    t = model.seq_len
    dlogits = (probs - onehot) / batch
    grads["head_w"] = dlogits.T @ cache["gap"]
    grads["head_b"] = dlogits.sum(axis=0)
    dgap = dlogits @ p["head_w"]
    dcur = np.repeat(dgap[:, :, None], t, axis=2) / t

    f = cfg.n_filters
    for i in reversed(range(cfg.depth)):
        c = cache["modules"][i]
        dblock_in = None
        if cfg.use_residual and (i + 1) % cfg.residual_every == 0:
            dsummed = dcur * c["relu2"]
            dshort, dw_r, db_r = _conv1d_same_backward(dsummed, c["xp_r"], p[f"res{i}_w"], t)
            grads[f"res{i}_w"] = dw_r
            grads[f"res{i}_b"] = db_r
            dblock_in = dshort
            dcur = dsummed
        dcat = dcur * c["relu1"]
        dzb = np.zeros_like(c["zb"])
        for j in range(3):
            dyj = dcat[:, j * f:(j + 1) * f]
            dzb_j, dw_j, db_j = _conv1d_same_backward(dyj, c["xps"][j], p[f"mod{i}_conv{j}_w"], t)
            grads[f"mod{i}_conv{j}_w"] = dw_j
            grads[f"mod{i}_conv{j}_b"] = db_j
            dzb += dzb_j
        dypool = dcat[:, 3 * f:]
        dpooled, dw_p, db_p = _conv1d_same_backward(dypool, c["xp_p"], p[f"mod{i}_pool_w"], t)
        grads[f"mod{i}_pool_w"] = dw_p
        grads[f"mod{i}_pool_b"] = db_p
        dx_pool = _maxpool3_same_backward(dpooled, c["arg"], t)
        dx_b, dw_b, db_b = _conv1d_same_backward(dzb, c["xp_b"], p[f"mod{i}_bottleneck_w"], t)
        grads[f"mod{i}_bottleneck_w"] = dw_b
        grads[f"mod{i}_bottleneck_b"] = db_b
        dcur = dx_b + dx_pool
        if dblock_in is not None:
            # the shortcut taps the input of the residual block; for the
            # desk-scale depths every block starts at the network input or at
            # the previous residual output, both of which coincide with the
            # module-(i-residual_every+1) input handled when unwinding there.
            start = i - cfg.residual_every + 1
            if start <= 0:
                cache.setdefault("dinput_extra", []).append(dblock_in)
            else:
                cache["modules"][start].setdefault("dx_extra", []).append(dblock_in)
        extra = c.get("dx_extra")
        if extra:
            for e in extra:
                dcur = dcur + e
    return grads


def images_to_batch(images, in_channels: int | None = None) -> np.ndarray:
    """Stack ImageTensors (or arrays) into a (B, N, N) batch with shape checks."""
    arrays = []
    for img in images:
        data = img.data if isinstance(img, ImageTensor) else np.asarray(img, dtype=float)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError("each image must be square")
        if in_channels is not None and data.shape[0] != in_channels:
            raise ValueError(f"image size {data.shape[0]} does not match model input {in_channels}")
        arrays.append(data)
    return np.stack(arrays)


def predict_proba_batch(model: ModelState, images) -> np.ndarray:
    x = images_to_batch(images, model.in_channels)
    probs, _ = _forward(model, x)
    return probs


def predict_proba(model: ModelState, image) -> np.ndarray:
    """Class probability vector for one image."""
    return predict_proba_batch(model, [image])[0]


def predict(model: ModelState, images) -> np.ndarray:
    return np.argmax(predict_proba_batch(model, images), axis=1)


def _cross_entropy(probs: np.ndarray, onehot: np.ndarray) -> float:
    return float(-np.mean(np.sum(onehot * np.log(np.clip(probs, 1e-300, None)), axis=1)))


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    y = np.asarray(labels, dtype=int)
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError("labels out of range for one-hot encoding")
    out = np.zeros((y.shape[0], n_classes))
    out[np.arange(y.shape[0]), y] = 1.0
    return out


def train(model: ModelState, images, labels, cfg: NetConfig | None = None) -> tuple[ModelState, list[dict]]:
    """Mini-batch Adam training; returns the model and a per-epoch history.

    History entries carry epoch, mean loss, and train accuracy. A NaN loss
    aborts with a diagnostic.
    """
    if cfg is None:
        cfg = model.cfg
    x = images_to_batch(images, model.in_channels)
    if x.shape[0] == 0:
        raise ValueError("empty training set")
    y = np.asarray(labels, dtype=int)
    onehot = one_hot(y, cfg.n_classes)
    rng = np.random.default_rng()
    rng.bit_generator.state = model.rng_state
    history = []
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    for epoch in range(cfg.epochs):
        perm = rng.permutation(x.shape[0])
        losses = []
        correct = 0
        for start in range(0, x.shape[0], cfg.batch_size):
            take = perm[start:start + cfg.batch_size]
            xb, yb = x[take], onehot[take]
            probs, cache = _forward(model, xb, keep_cache=True)
            loss = _cross_entropy(probs, yb)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became non-finite at epoch {epoch}, batch {start // cfg.batch_size}")
            losses.append(loss * take.shape[0])
            correct += int((np.argmax(probs, axis=1) == y[take]).sum())
            grads = _backward(model, xb, probs, yb, cache)
            model.step += 1
            bc1 = 1.0 - beta1 ** model.step
            bc2 = 1.0 - beta2 ** model.step
            for name, g in grads.items():
                m = model.adam_m[name]
                v = model.adam_v[name]
                m *= beta1
                m += (1 - beta1) * g
                v *= beta2
                v += (1 - beta2) * g * g
                model.params[name] -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + eps)
        history.append({"epoch": epoch, "loss": float(np.sum(losses) / x.shape[0]),
                        "train_acc": correct / x.shape[0]})
    model.rng_state = rng.bit_generator.state
    return model, history


def train_ensemble(cfg: NetConfig, images, labels, in_channels: int,
                   seq_len: int) -> list[ModelState]:
    """Train cfg.ensemble independently seeded models on the same data."""
    models = []
    for i in range(cfg.ensemble):
        sub = replace(cfg, seed=cfg.seed + 1000 * i, ensemble=1)
        model = build(sub, in_channels, seq_len)
        model, _ = train(model, images, labels)
        models.append(model)
    return models


def predict_proba_ensemble(models: list[ModelState], image) -> np.ndarray:
    """Softmax-averaged prediction across ensemble members."""
    return np.mean([predict_proba(m, image) for m in models], axis=0)


def loss_and_grads(model: ModelState, image, label: int) -> tuple[float, dict]:
    """Cross-entropy loss and parameter gradients for a single example."""
    x = images_to_batch([image], model.in_channels)
    onehot = one_hot(np.array([label]), model.cfg.n_classes)
    probs, cache = _forward(model, x, keep_cache=True)
    grads = _backward(model, x, probs, onehot, cache)
    return _cross_entropy(probs, onehot), grads


def gradient_check(model: ModelState, image, label: int, n_params: int = 64,
                   epsilon: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples n_params parameters across all tensors; relative error uses
    |a - n| / max(|a|, |n|, 1e-8).
    """
    _, grads = loss_and_grads(model, image, label)
    names = model.parameter_names()
    sizes = [model.params[n].size for n in names]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    flat_idx = rng.choice(total, size=min(n_params, total), replace=False)
    offsets = np.cumsum([0] + sizes)
    worst = 0.0
    x = images_to_batch([image], model.in_channels)
    onehot = one_hot(np.array([label]), model.cfg.n_classes)
    for fi in sorted(flat_idx):
        slot = int(np.searchsorted(offsets, fi, side="right") - 1)
        name = names[slot]
        local = fi - offsets[slot]
        tensor = model.params[name]
        orig = tensor.flat[local]
        tensor.flat[local] = orig + epsilon
        p_hi, _ = _forward(model, x)
        hi = _cross_entropy(p_hi, onehot)
        tensor.flat[local] = orig - epsilon
        p_lo, _ = _forward(model, x)
        lo = _cross_entropy(p_lo, onehot)
        tensor.flat[local] = orig
        numeric = (hi - lo) / (2 * epsilon)
        analytic = grads[name].flat[local]
        denom = max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst


def write_loss_curve(path, history: list[dict]) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,loss,train_acc\n")
        for h in history:
            fh.write(f"{h['epoch']},{h['loss']:.17g},{h['train_acc']:.17g}\n")


def save_model(path, model: ModelState) -> None:
    """Versioned binary dump: magic, config and metadata JSON, then tensors."""
    meta = {
        "config": model.cfg.to_dict(),
        "in_channels": model.in_channels,
        "seq_len": model.seq_len,
        "step": model.step,
        "rng_state": _encode_rng(model.rng_state),
        "tensors": [],
    }
    blobs = []
    for name in model.parameter_names():
        for group, store in (("p", model.params), ("m", model.adam_m), ("v", model.adam_v)):
            arr = np.ascontiguousarray(store[name], dtype="<f8")
            meta["tensors"].append({"name": name, "group": group, "shape": list(arr.shape)})
            blobs.append(arr.tobytes())
    header = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_model(path) -> ModelState:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError("not a model file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(hlen).decode())
        cfg = NetConfig(**meta["config"])
        params: dict = {}
        adam_m: dict = {}
        adam_v: dict = {}
        stores = {"p": params, "m": adam_m, "v": adam_v}
        for entry in meta["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * count)
            stores[entry["group"]][entry["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return ModelState(cfg=cfg, in_channels=meta["in_channels"], seq_len=meta["seq_len"],
                      params=params, adam_m=adam_m, adam_v=adam_v, step=meta["step"],
                      rng_state=_decode_rng(meta["rng_state"]))


def _encode_rng(state: dict) -> dict:
    out = json.loads(json.dumps(state, default=int))
    return out


def _decode_rng(state: dict) -> dict:
    def fix(obj):
        if isinstance(obj, dict):
            return {k: fix(v) for k, v in obj.items()}
        return obj
    return fix(state)
