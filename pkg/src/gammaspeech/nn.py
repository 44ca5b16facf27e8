"""Compact convolutional network, written from scratch on numpy.

Supports conv (stride 1, same padding), relu, 2x2/2 max pooling, flatten,
dense, and a final softmax. Training is minibatch SGD with momentum and is
fully deterministic given (spec, seed, data order, hyper): one PCG64 stream
seeded from the given seed drives initialization (layer order, row-major
fill) and another drives epoch shuffling. Backward passes are validated
against central finite differences by grad_check().
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_MAGIC = b"GSNET\x00"
CHECKPOINT_VERSION = 1


class CheckpointVersionError(ValueError):
    """Container version is not one this code reads."""


class CorruptCheckpointError(ValueError):
    """Container is truncated or structurally invalid."""


@dataclass(frozen=True)
class LayerSpec:
    type: str                   # conv | relu | maxpool | flatten | dense | softmax
    filters: int = 0
    kernel: int = 0
    units: int = 0

    def to_dict(self) -> dict:
        d = {"type": self.type}
        if self.type == "conv":
            d["filters"] = self.filters
            d["kernel"] = self.kernel
        elif self.type == "dense":
            d["units"] = self.units
        return d


def conv(filters: int, kernel: int) -> LayerSpec:
    return LayerSpec("conv", filters=filters, kernel=kernel)


def relu() -> LayerSpec:
    return LayerSpec("relu")


def maxpool() -> LayerSpec:
    return LayerSpec("maxpool")


def flatten() -> LayerSpec:
    return LayerSpec("flatten")


def dense(units: int) -> LayerSpec:
    return LayerSpec("dense", units=units)


def softmax() -> LayerSpec:
    return LayerSpec("softmax")


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: tuple[int, int, int]   # (h, w, channels)
    layers: tuple[LayerSpec, ...]
    class_count: int

    def __post_init__(self):
        self.shape_chain()

    def shape_chain(self) -> list[tuple]:
        """Output shape after every layer; raises if layers do not compose."""
        shape = tuple(self.input_shape)
        chain = [shape]
        for i, layer in enumerate(self.layers):
            if layer.type == "conv":
                if len(shape) != 3:
                    raise ValueError(f"layer {i}: conv needs an image input")
                if layer.kernel % 2 != 1:
                    raise ValueError(f"layer {i}: conv kernel must be odd")
                shape = (shape[0], shape[1], layer.filters)
            elif layer.type == "relu":
                pass
            elif layer.type == "maxpool":
                if len(shape) != 3 or shape[0] % 2 or shape[1] % 2:
                    raise ValueError(
                        f"layer {i}: maxpool needs even image dims, got {shape}")
                shape = (shape[0] // 2, shape[1] // 2, shape[2])
            elif layer.type == "flatten":
                shape = (int(np.prod(shape)),)
            elif layer.type == "dense":
                if len(shape) != 1:
                    raise ValueError(f"layer {i}: dense needs a flat input")
                shape = (layer.units,)
            elif layer.type == "softmax":
                if i != len(self.layers) - 1:
                    raise ValueError("softmax must be the final layer")
                if shape != (self.class_count,):
                    raise ValueError(
                        f"softmax input {shape} != class_count "
                        f"{self.class_count}")
            else:
                raise ValueError(f"unknown layer type {layer.type!r}")
            chain.append(shape)
        if not self.layers or self.layers[-1].type != "softmax":
            raise ValueError("final layer must be softmax")
        return chain

    def param_layers(self) -> list[tuple[str, LayerSpec, tuple]]:
        """(name, layer, input shape) for every parametric layer, in order."""
        chain = self.shape_chain()
        out = []
        n_conv = n_dense = 0
        for i, layer in enumerate(self.layers):
            if layer.type == "conv":
                n_conv += 1
                out.append((f"conv{n_conv}", layer, chain[i]))
            elif layer.type == "dense":
                n_dense += 1
                out.append((f"dense{n_dense}", layer, chain[i]))
        return out

    def to_dict(self) -> dict:
        return {"input": list(self.input_shape),
                "layers": [l.to_dict() for l in self.layers],
                "class_count": self.class_count}

    @staticmethod
    def from_dict(d: dict) -> "NetworkSpec":
        layers = tuple(LayerSpec(type=l["type"], filters=l.get("filters", 0),
                                 kernel=l.get("kernel", 0),
                                 units=l.get("units", 0))
                       for l in d["layers"])
        return NetworkSpec(input_shape=tuple(d["input"]), layers=layers,
                           class_count=int(d["class_count"]))


def gammanet_s(class_count: int, size: int = 64) -> NetworkSpec:
    """Default architecture: 64x64x3 in, two conv/pool blocks, two dense."""
    return NetworkSpec(
        input_shape=(size, size, 3),
        layers=(conv(8, 5), relu(), maxpool(),
                conv(16, 5), relu(), maxpool(),
                flatten(), dense(128), relu(),
                dense(class_count), softmax()),
        class_count=class_count)


@dataclass
class Hyper:
    lr: float = 0.01
    momentum: float = 0.9
    batch: int = 32
    epochs: int = 20
    seed: int | list = 0      # lists allow derived per-fold child seeds

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")

    def to_dict(self) -> dict:
        return {"seed": self.seed, "epochs": self.epochs, "lr": self.lr,
                "momentum": self.momentum, "batch": self.batch}


@dataclass
class Checkpoint:
    spec: NetworkSpec
    params: dict[str, np.ndarray]
    format_version: int = CHECKPOINT_VERSION
    train_meta: dict = field(default_factory=dict)

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype


def _param_shapes(name: str, layer: LayerSpec, in_shape: tuple,
                  ) -> tuple[tuple, tuple]:
    if layer.type == "conv":
        k, cin, f = layer.kernel, in_shape[2], layer.filters
        return (k, k, cin, f), (f,)
    d = in_shape[0]
    return (d, layer.units), (layer.units,)


def _xavier_bound(layer: LayerSpec, in_shape: tuple) -> float:
    if layer.type == "conv":
        k, cin, f = layer.kernel, in_shape[2], layer.filters
        fan_in, fan_out = k * k * cin, k * k * f
    else:
        fan_in, fan_out = in_shape[0], layer.units
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_network(spec: NetworkSpec, seed: int | list,
                 dtype=np.float32) -> Checkpoint:
    """Xavier-uniform weights, zero biases, one rng stream in layer order."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, layer, in_shape in spec.param_layers():
        w_shape, b_shape = _param_shapes(name, layer, in_shape)
        a = _xavier_bound(layer, in_shape)
        params[name + ".w"] = rng.uniform(-a, a, size=w_shape).astype(dtype)
        params[name + ".b"] = np.zeros(b_shape, dtype=dtype)
    return Checkpoint(spec=spec, params=params,
                      train_meta={"seed": seed, "epochs": 0, "lr": 0.0,
                                  "momentum": 0.0, "batch": 0})


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    k = w.shape[0]
    pad = k // 2
    bsz, h, wd, cin = x.shape
    f = w.shape[3]
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(1, 2))
    # win: (B, H, W, Cin, k, k) -> cols (B*H*W, k*k*Cin) in (ki, kj, c) order
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(bsz * h * wd, k * k * cin)
    cols = np.ascontiguousarray(cols)
    out = cols @ w.reshape(k * k * cin, f) + b
    return out.reshape(bsz, h, wd, f), cols


def _conv_backward(dout: np.ndarray, x_shape: tuple, cols: np.ndarray,
                   w: np.ndarray):
    bsz, h, wd, cin = x_shape
    k, f = w.shape[0], w.shape[3]
    pad = k // 2
    dmat = dout.reshape(-1, f)
    dw = (cols.T @ dmat).reshape(w.shape)
    db = dmat.sum(axis=0)
    dcols = (dmat @ w.reshape(k * k * cin, f).T).reshape(
        bsz, h, wd, k, k, cin)
    dxp = np.zeros((bsz, h + 2 * pad, wd + 2 * pad, cin), dtype=dout.dtype)
    for ki in range(k):
        for kj in range(k):
            dxp[:, ki:ki + h, kj:kj + wd, :] += dcols[:, :, :, ki, kj, :]
    return dxp[:, pad:pad + h, pad:pad + wd, :], dw, db


def _pool_forward(x: np.ndarray):
    bsz, h, wd, c = x.shape
    grid = x.reshape(bsz, h // 2, 2, wd // 2, 2, c)
    quads = grid.transpose(0, 1, 3, 5, 2, 4).reshape(
        bsz, h // 2, wd // 2, c, 4)
    idx = np.argmax(quads, axis=-1)   # first max wins on ties
    out = np.take_along_axis(quads, idx[..., None], axis=-1)[..., 0]
    return out, idx


def _pool_backward(dout: np.ndarray, idx: np.ndarray, x_shape: tuple):
    bsz, h, wd, c = x_shape
    dquads = np.zeros((bsz, h // 2, wd // 2, c, 4), dtype=dout.dtype)
    np.put_along_axis(dquads, idx[..., None], dout[..., None], axis=-1)
    grid = dquads.reshape(bsz, h // 2, wd // 2, c, 2, 2).transpose(
        0, 1, 4, 2, 5, 3)
    return grid.reshape(bsz, h, wd, c)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _forward_cache(spec: NetworkSpec, params: dict, x: np.ndarray):
    """Run all layers up to the logits, recording what backward needs."""
    caches = []
    n_conv = n_dense = 0
    a = x
    for layer in spec.layers:
        if layer.type == "conv":
            n_conv += 1
            name = f"conv{n_conv}"
            out, cols = _conv_forward(a, params[name + ".w"],
                                      params[name + ".b"])
            caches.append(("conv", name, a.shape, cols))
            a = out
        elif layer.type == "relu":
            caches.append(("relu", a > 0))
            a = np.maximum(a, 0)
        elif layer.type == "maxpool":
            out, idx = _pool_forward(a)
            caches.append(("maxpool", idx, a.shape))
            a = out
        elif layer.type == "flatten":
            caches.append(("flatten", a.shape))
            a = a.reshape(a.shape[0], -1)
        elif layer.type == "dense":
            n_dense += 1
            name = f"dense{n_dense}"
            caches.append(("dense", name, a))
            a = a @ params[name + ".w"] + params[name + ".b"]
        elif layer.type == "softmax":
            caches.append(("softmax",))
    return a, caches


def _backward(params: dict, caches: list, dlogits: np.ndarray) -> dict:
    grads = {}
    d = dlogits
    for cache in reversed(caches):
        kind = cache[0]
        if kind == "softmax":
            continue
        if kind == "dense":
            _, name, a_in = cache
            grads[name + ".w"] = a_in.T @ d
            grads[name + ".b"] = d.sum(axis=0)
            d = d @ params[name + ".w"].T
        elif kind == "flatten":
            d = d.reshape(cache[1])
        elif kind == "maxpool":
            _, idx, x_shape = cache
            d = _pool_backward(d, idx, x_shape)
        elif kind == "relu":
            d = d * cache[1]
        elif kind == "conv":
            _, name, x_shape, cols = cache
            d, dw, db = _conv_backward(d, x_shape, cols, params[name + ".w"])
            grads[name + ".w"] = dw
            grads[name + ".b"] = db
    return grads


def _check_input(spec: NetworkSpec, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch)
    if batch.ndim == 3:
        batch = batch[None]
    if batch.shape[1:] != tuple(spec.input_shape):
        raise ValueError(f"input shape {batch.shape[1:]} does not match "
                         f"network input {spec.input_shape}")
    return batch


def forward(ckpt: Checkpoint, batch: np.ndarray) -> np.ndarray:
    """Class probabilities, one row per image, rows summing to 1."""
    x = _check_input(ckpt.spec, batch).astype(ckpt.dtype, copy=False)
    logits, _ = _forward_cache(ckpt.spec, ckpt.params, x)
    return np.exp(_log_softmax(logits))


def loss_and_grads(spec: NetworkSpec, params: dict, x: np.ndarray,
                   y: np.ndarray) -> tuple[float, dict]:
    """Mean cross-entropy over the batch and its parameter gradients."""
    logits, caches = _forward_cache(spec, params, x)
    logp = _log_softmax(logits)
    n = len(y)
    loss = float(-logp[np.arange(n), y].mean())
    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    grads = _backward(params, caches, dlogits.astype(x.dtype))
    return loss, grads


def train(ckpt: Checkpoint, images: np.ndarray, labels: np.ndarray,
          hyper: Hyper, freeze: tuple[str, ...] = (),
          ) -> tuple[Checkpoint, list[float]]:
    """Minibatch SGD with momentum on cross-entropy.

    `freeze` names parametric layers whose arrays must come out bit-identical.
    Returns a new checkpoint plus the mean training loss per epoch.
    """
    x = _check_input(ckpt.spec, images).astype(ckpt.dtype, copy=False)
    y = np.asarray(labels, dtype=np.int64)
    if len(x) == 0:
        raise ValueError("empty training set")
    if y.min() < 0 or y.max() >= ckpt.spec.class_count:
        raise ValueError("label outside [0, class_count)")
    layer_names = [name for name, _, _ in ckpt.spec.param_layers()]
    for name in freeze:
        if name not in layer_names:
            raise ValueError(f"cannot freeze unknown layer {name!r}")
    trainable = [n for n in layer_names if n not in freeze]
    if not trainable:
        raise ValueError("every parametric layer is frozen")
    params = {k: v.copy() for k, v in ckpt.params.items()}
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    lr = ckpt.dtype.type(hyper.lr)
    momentum = ckpt.dtype.type(hyper.momentum)
    rng = np.random.default_rng(hyper.seed)
    history = []
    n = len(x)
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, hyper.batch):
            sel = order[start:start + hyper.batch]
            loss, grads = loss_and_grads(ckpt.spec, params, x[sel], y[sel])
            total += loss * len(sel)
            for layer in trainable:
                for suffix in (".w", ".b"):
                    key = layer + suffix
                    v = velocity[key]
                    v *= momentum
                    v -= lr * grads[key]
                    params[key] += v
        history.append(total / n)
    meta = dict(ckpt.train_meta)
    meta.update(hyper.to_dict())
    return Checkpoint(spec=ckpt.spec, params=params,
                      format_version=ckpt.format_version,
                      train_meta=meta), history


def predict(ckpt: Checkpoint, image: np.ndarray) -> tuple[int, float]:
    """Most probable class and its probability; ties go to the lowest index."""
    probs = forward(ckpt, image)[0]
    label = int(np.argmax(probs))
    return label, float(probs[label])


def predict_batch(ckpt: Checkpoint, images: np.ndarray,
                  chunk: int = 256) -> np.ndarray:
    """Argmax labels for many images, evaluated in memory-bounded chunks."""
    out = []
    for start in range(0, len(images), chunk):
        probs = forward(ckpt, images[start:start + chunk])
        out.append(np.argmax(probs, axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def transfer_head(base: Checkpoint, new_class_count: int,
                  seed: int | list) -> Checkpoint:
    """Copy the feature-extraction stack, re-initialize every dense layer.

    Conv arrays are copied bit-exactly; dense layers are redrawn with the
    init rules (one stream from `seed`, layer order), sized for the new
    class count.
    """
    if new_class_count < 2:
        raise ValueError("need at least 2 classes")
    layers = list(base.spec.layers)
    for i in reversed(range(len(layers))):
        if layers[i].type == "dense":
            layers[i] = dense(new_class_count)
            break
    spec = NetworkSpec(input_shape=base.spec.input_shape,
                       layers=tuple(layers), class_count=new_class_count)
    rng = np.random.default_rng(seed)
    dtype = base.dtype
    params: dict[str, np.ndarray] = {}
    for name, layer, in_shape in spec.param_layers():
        if layer.type == "conv":
            params[name + ".w"] = base.params[name + ".w"].copy()
            params[name + ".b"] = base.params[name + ".b"].copy()
        else:
            w_shape, b_shape = _param_shapes(name, layer, in_shape)
            a = _xavier_bound(layer, in_shape)
            params[name + ".w"] = rng.uniform(-a, a, size=w_shape).astype(dtype)
            params[name + ".b"] = np.zeros(b_shape, dtype=dtype)
    return Checkpoint(spec=spec, params=params,
                      train_meta={"seed": seed, "epochs": 0, "lr": 0.0,
                                  "momentum": 0.0, "batch": 0,
                                  "transferred_from": base.train_meta.get("seed")})


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

def grad_check_spec() -> NetworkSpec:
    """Small double-precision network used by the finite-difference check."""
    return NetworkSpec(input_shape=(8, 8, 1),
                       layers=(conv(2, 3), relu(), maxpool(), flatten(),
                               dense(4), softmax()),
                       class_count=4)


def _activation_margins(spec: NetworkSpec, params: dict,
                        x: np.ndarray) -> float:
    """Smallest distance to a relu kink or pooling tie across the batch."""
    margin = np.inf
    a = x
    n_conv = n_dense = 0
    for layer in spec.layers:
        if layer.type == "conv":
            n_conv += 1
            name = f"conv{n_conv}"
            a, _ = _conv_forward(a, params[name + ".w"], params[name + ".b"])
        elif layer.type == "relu":
            margin = min(margin, float(np.abs(a).min()))
            a = np.maximum(a, 0)
        elif layer.type == "maxpool":
            bsz, h, wd, c = a.shape
            quads = a.reshape(bsz, h // 2, 2, wd // 2, 2, c).transpose(
                0, 1, 3, 5, 2, 4).reshape(bsz, h // 2, wd // 2, c, 4)
            top2 = np.sort(quads, axis=-1)[..., -2:]
            # ties between exact zeros (post-relu) are stable under an eps
            # parameter step; only near-ties between positive values matter
            contested = top2[..., 0] > 0
            if np.any(contested):
                gaps = (top2[..., 1] - top2[..., 0])[contested]
                margin = min(margin, float(gaps.min()))
            a, _ = _pool_forward(a)
        elif layer.type == "flatten":
            a = a.reshape(a.shape[0], -1)
        elif layer.type == "dense":
            n_dense += 1
            name = f"dense{n_dense}"
            a = a @ params[name + ".w"] + params[name + ".b"]
    return margin


def grad_check(spec: NetworkSpec | None = None, seed: int = 0,
               eps: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs in double precision on a small network. Inputs are redrawn from
    derived seeds until every relu pre-activation and pooling gap clears a
    margin of 10*eps; a parameter step of +-eps moves any pre-activation by
    at most eps (inputs are bounded by 1), so the finite-difference step can
    never cross a relu kink or flip a pooling argmax.
    """
    if spec is None:
        spec = grad_check_spec()
    ckpt = init_network(spec, seed, dtype=np.float64)
    n_params = sum(v.size for v in ckpt.params.values())
    if n_params > 10_000:
        raise ValueError(f"grad_check spec too large: {n_params} parameters")
    batch = 2
    margin = 10.0 * eps
    for attempt in range(64):
        rng = np.random.default_rng([seed, attempt])
        x = rng.uniform(-1.0, 1.0, size=(batch,) + tuple(spec.input_shape))
        y = rng.integers(0, spec.class_count, size=batch)
        if _activation_margins(spec, ckpt.params, x) > margin:
            break
    else:
        raise RuntimeError("could not find a kink-free input batch")
    _, grads = loss_and_grads(spec, ckpt.params, x, y)
    worst = 0.0
    for key, arr in ckpt.params.items():
        flat = arr.ravel()
        g = grads[key].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp, _ = loss_and_grads(spec, ckpt.params, x, y)
            flat[i] = orig - eps
            lm, _ = loss_and_grads(spec, ckpt.params, x, y)
            flat[i] = orig
            fd = (lp - lm) / (2.0 * eps)
            rel = abs(fd - g[i]) / max(abs(fd) + abs(g[i]), 1e-8)
            worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------

def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Versioned binary container; arrays stored little-endian, C order."""
    header = json.dumps({"spec": ckpt.spec.to_dict(),
                         "train_meta": ckpt.train_meta},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", ckpt.format_version))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(struct.pack("<I", len(ckpt.params)))
        for name in sorted(ckpt.params):
            arr = ckpt.params[name]
            if arr.dtype == np.float32:
                flag = 4
            elif arr.dtype == np.float64:
                flag = 8
            else:
                raise ValueError(f"unsupported dtype {arr.dtype}")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<BB", flag, arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype=f"<f{flag}").tobytes())


def _read_exact(fh, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise CorruptCheckpointError(
            f"truncated checkpoint: wanted {n} bytes, got {len(buf)}")
    return buf


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CorruptCheckpointError(f"{path}: bad magic {magic!r}")
        version = struct.unpack("<I", _read_exact(fh, 4))[0]
        if version != CHECKPOINT_VERSION:
            raise CheckpointVersionError(
                f"{path}: container version {version}, "
                f"this build reads {CHECKPOINT_VERSION}")
        header_len = struct.unpack("<I", _read_exact(fh, 4))[0]
        try:
            header = json.loads(_read_exact(fh, header_len))
            spec = NetworkSpec.from_dict(header["spec"])
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise CorruptCheckpointError(f"{path}: bad header ({exc})") from exc
        n_arrays = struct.unpack("<I", _read_exact(fh, 4))[0]
        params: dict[str, np.ndarray] = {}
        for _ in range(n_arrays):
            name_len = struct.unpack("<H", _read_exact(fh, 2))[0]
            name = _read_exact(fh, name_len).decode("utf-8")
            flag, ndim = struct.unpack("<BB", _read_exact(fh, 2))
            if flag not in (4, 8):
                raise CorruptCheckpointError(f"{path}: bad dtype flag {flag}")
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim))
            count = int(np.prod(shape)) if shape else 1
            raw = _read_exact(fh, count * flag)
            params[name] = np.frombuffer(raw, dtype=f"<f{flag}").reshape(shape).copy()
        if fh.read(1) != b"":
            raise CorruptCheckpointError(f"{path}: trailing bytes")
    expected = {name + s for name, _, _ in spec.param_layers()
                for s in (".w", ".b")}
    if set(params) != expected:
        raise CorruptCheckpointError(
            f"{path}: arrays {sorted(params)} do not match spec layers")
    ckpt = Checkpoint(spec=spec, params=params, format_version=version,
                      train_meta=header.get("train_meta", {}))
    for name, layer, in_shape in spec.param_layers():
        w_shape, b_shape = _param_shapes(name, layer, in_shape)
        if params[name + ".w"].shape != w_shape or \
                params[name + ".b"].shape != b_shape:
            raise CorruptCheckpointError(
                f"{path}: array shapes for {name} do not match spec")
    return ckpt
