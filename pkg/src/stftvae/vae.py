"""Small convolutional VAE for 28x28 single-channel images.

Encoder: conv 32@3x3/2 -> conv 64@3x3/2 -> dense to ``2 * latent_dim``
(mu followed by log-variance). Decoder: dense to 7x7x32 -> transposed
conv 64@3x3/2 -> transposed conv 32@3x3/2 -> transposed conv 1@3x3/1,
producing logits. Every convolution uses ``same`` padding and is followed
by ReLU except the last.

Parameters live in a plain ``dict`` of arrays; the forward functions also
accept a dict of autodiff Variables.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import tensor as T
from .errors import CheckpointError, ShapeError
from .losses import LatentDistribution

IMAGE_SIDE = 28
LATENT_DIM = 2
CHECKPOINT_VERSION = 1


def param_shapes(latent_dim=LATENT_DIM):
    """Name -> shape for every parameter, in a fixed order."""
    return {
        "enc_conv1_w": (32, 1, 3, 3),
        "enc_conv1_b": (32,),
        "enc_conv2_w": (64, 32, 3, 3),
        "enc_conv2_b": (64,),
        "enc_dense_w": (64 * 7 * 7, 2 * latent_dim),
        "enc_dense_b": (2 * latent_dim,),
        "dec_dense_w": (latent_dim, 32 * 7 * 7),
        "dec_dense_b": (32 * 7 * 7,),
        # transposed-conv kernels are (C_in, C_out, k, k)
        "dec_deconv1_w": (32, 64, 3, 3),
        "dec_deconv1_b": (64,),
        "dec_deconv2_w": (64, 32, 3, 3),
        "dec_deconv2_b": (32,),
        "dec_deconv3_w": (32, 1, 3, 3),
        "dec_deconv3_b": (1,),
    }


def _fans(shape):
    # the Glorot limit only depends on fan_in + fan_out, so kernel layout is irrelevant
    if len(shape) == 2:
        return shape[0], shape[1]
    rf = shape[2] * shape[3]
    return shape[1] * rf, shape[0] * rf


def init_params(seed=0, latent_dim=LATENT_DIM, dtype=None):
    """Glorot-uniform kernels and zero biases from a seeded generator."""
    rng = np.random.default_rng(seed)
    dtype = dtype or T.get_default_dtype()
    params = {}
    for name, shape in param_shapes(latent_dim).items():
        if name.endswith("_b"):
            params[name] = np.zeros(shape, dtype=dtype)
        else:
            fan_in, fan_out = _fans(shape)
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
    return params


def zero_params(latent_dim=LATENT_DIM, dtype=None):
    dtype = dtype or T.get_default_dtype()
    return {k: np.zeros(s, dtype=dtype) for k, s in param_shapes(latent_dim).items()}


def count_params(params):
    return int(sum(np.asarray(ad.value(v)).size for v in params.values()))


def latent_dim_of(params):
    return ad.value(params["dec_dense_w"]).shape[0]


# -- forward ------------------------------------------------------------------


def _as_batch(x):
    a = ad.value(x)
    if a.shape[-2:] != (IMAGE_SIDE, IMAGE_SIDE) or a.ndim not in (2, 3, 4):
        raise ShapeError(f"expected 28x28 image(s), got shape {a.shape}")
    if a.ndim == 4:
        if a.shape[1] != 1:
            raise ShapeError(f"expected a single channel, got shape {a.shape}")
        return x, False
    n = 1 if a.ndim == 2 else a.shape[0]
    return ad.reshape(x, (n, 1, IMAGE_SIDE, IMAGE_SIDE)), a.ndim == 2


def encode(params, x):
    """Map image(s) to the posterior ``LatentDistribution`` (mu, log-variance)."""
    xb, single = _as_batch(x)
    h = ad.relu(ad.bias_add(ad.conv2d(xb, params["enc_conv1_w"], 2, "same"), params["enc_conv1_b"], axis=1))
    h = ad.relu(ad.bias_add(ad.conv2d(h, params["enc_conv2_w"], 2, "same"), params["enc_conv2_b"], axis=1))
    n = ad.value(h).shape[0]
    h = ad.reshape(h, (n, -1))
    out = ad.bias_add(ad.matmul(h, params["enc_dense_w"]), params["enc_dense_b"], axis=-1)
    d = ad.value(out).shape[1] // 2
    mu, log_var = out[:, :d], out[:, d:]
    if single:
        mu, log_var = ad.reshape(mu, (d,)), ad.reshape(log_var, (d,))
    return LatentDistribution(mu, log_var)


@dataclass
class LatentSample:
    z: object
    eps: np.ndarray


def reparameterize(q, eps):
    """``z = mu + exp(log_var / 2) * eps`` with caller-supplied noise."""
    eps = np.asarray(eps, dtype=ad.value(q.mu).dtype)
    if eps.shape != ad.value(q.mu).shape:
        raise ShapeError(f"noise shape {eps.shape} does not match latent shape {ad.value(q.mu).shape}")
    z = q.mu + ad.exp(q.log_var * 0.5) * eps
    return LatentSample(z, eps)


def decode(params, z):
    """Latent code(s) ``(latent_dim,)`` or ``(N, latent_dim)`` to 28x28 logits."""
    a = ad.value(z)
    d = latent_dim_of(params)
    if a.shape[-1:] != (d,) or a.ndim not in (1, 2):
        raise ShapeError(f"expected latent codes of size {d}, got shape {a.shape}")
    single = a.ndim == 1
    zb = ad.reshape(z, (1, d)) if single else z
    n = ad.value(zb).shape[0]
    h = ad.relu(ad.bias_add(ad.matmul(zb, params["dec_dense_w"]), params["dec_dense_b"], axis=-1))
    h = ad.reshape(h, (n, 32, 7, 7))
    h = ad.relu(ad.bias_add(ad.conv2d_transpose(h, params["dec_deconv1_w"], 2, "same"), params["dec_deconv1_b"], axis=1))
    h = ad.relu(ad.bias_add(ad.conv2d_transpose(h, params["dec_deconv2_w"], 2, "same"), params["dec_deconv2_b"], axis=1))
    h = ad.bias_add(ad.conv2d_transpose(h, params["dec_deconv3_w"], 1, "same"), params["dec_deconv3_b"], axis=1)
    return ad.reshape(h, (IMAGE_SIDE, IMAGE_SIDE) if single else (n, IMAGE_SIDE, IMAGE_SIDE))


def decode_sample(params, z):
    return ad.sigmoid(decode(params, z))


def reconstruct(params, x):
    """Deterministic reconstruction through the posterior mean (eps = 0)."""
    return decode_sample(params, encode(params, x).mu)


def generate(params, n, seed=0):
    """Decode ``n`` draws from the standard normal prior; shape ``(n, 28, 28)``."""
    d = latent_dim_of(params)
    if n == 0:
        return np.zeros((0, IMAGE_SIDE, IMAGE_SIDE))
    z = np.random.default_rng(seed).standard_normal((n, d)).astype(ad.value(params["dec_dense_w"]).dtype)
    return decode_sample(params, z)


# -- checkpoints --------------------------------------------------------------


def fingerprint(params, config=None):
    """Hash over parameter names, shapes, dtypes and the (JSON-able) run config."""
    desc = [(k, list(np.shape(v)), str(np.asarray(v).dtype)) for k, v in sorted(params.items())]
    blob = json.dumps({"params": desc, "config": config or {}}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def save_checkpoint(path, params, config=None):
    """Write an ``.npz`` container holding a format version, the config and its fingerprint."""
    path = Path(path)
    meta = {"version": CHECKPOINT_VERSION, "fingerprint": fingerprint(params, config), "config": config or {}}
    arrays = {f"param/{k}": np.asarray(v) for k, v in params.items()}
    arrays["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        # np.savez stamps the current time into the zip; fixed stamps keep
        # checkpoints of identical runs byte-identical
        with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
            for name, arr in arrays.items():
                buf = io.BytesIO()
                np.lib.format.write_array(buf, arr, allow_pickle=False)
                zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path, expected_fingerprint=None):
    """Return ``(params, meta)``; rejects unknown versions and fingerprint mismatches."""
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(bytes(data["__meta__"]).decode())
            params = {k[len("param/"):]: data[k] for k in data.files if k.startswith("param/")}
    except (OSError, KeyError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {meta.get('version')}")
    if fingerprint(params, meta.get("config")) != meta.get("fingerprint"):
        raise CheckpointError(f"{path}: contents do not match the stored fingerprint")
    if expected_fingerprint is not None and meta["fingerprint"] != expected_fingerprint:
        raise CheckpointError(
            f"{path}: fingerprint {meta['fingerprint']} does not match expected {expected_fingerprint}"
        )
    return params, meta
