"""Self-describing binary checkpoint container.

Layout (all little-endian):

    magic        8 bytes  b"OSGDMIMO"
    version      uint32   currently 1
    seed         uint64   run seed recorded for reproducibility
    n_layers     uint32   number of weight layers K
    layer_dims   (K+1) x uint32
    activations  K bytes  0 = relu, 1 = sigmoid
    opt_kind     uint8    0 = none, 1 = adam, 2 = osgd
    t            uint64   optimizer step counter (0 when opt_kind = 0)
    per layer:   weight   float64 row-major (d_k x d_{k-1}), bias float64 d_k
    if opt_kind != 0, per layer: m_w, v_w like weight; m_b, v_b like bias
    if opt_kind == 2, per layer: psi float64 (d_{k-1} x d_{k-1})

Round trips are bit-exact. Truncated, oversized, or mislabeled files raise
CheckpointFormatError; an unknown version raises CheckpointVersionError.
"""

from __future__ import annotations

import struct
from typing import NamedTuple

import numpy as np

from .network import NetworkSpec, LayerParams, RELU, SIGMOID
from .optimizers import OptimizerState, OsgdLayerState

MAGIC = b"OSGDMIMO"
VERSION = 1

_ACT_CODE = {RELU: 0, SIGMOID: 1}
_ACT_NAME = {0: RELU, 1: SIGMOID}
_OPT_CODE = {None: 0, "adam": 1, "osgd": 2}
_OPT_NAME = {0: None, 1: "adam", 2: "osgd"}


class CheckpointFormatError(Exception):
    """File is not a readable checkpoint."""


class CheckpointVersionError(CheckpointFormatError):
    """Checkpoint version is not supported by this build."""


class Checkpoint(NamedTuple):
    params: list[LayerParams]
    spec: NetworkSpec
    optimizer_state: OptimizerState | None
    seed: int


def _array_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def save_model(
    params: list[LayerParams],
    spec: NetworkSpec,
    path,
    optimizer_state: OptimizerState | None = None,
    seed: int = 0,
) -> None:
    """Write a checkpoint; optimizer_state rides along so continual runs
    can resume with their projection matrices and moments intact."""
    if len(params) != spec.n_layers:
        raise ValueError("parameter count does not match spec")
    dims = spec.layer_dims
    kind = None if optimizer_state is None else optimizer_state.kind
    if kind not in _OPT_CODE:
        raise ValueError(f"unknown optimizer kind {kind!r}")
    chunks = [
        MAGIC,
        struct.pack("<IQI", VERSION, seed, spec.n_layers),
        struct.pack(f"<{len(dims)}I", *dims),
        bytes(
            _ACT_CODE[spec.activation(k)] for k in range(spec.n_layers)
        ),
        struct.pack(
            "<BQ",
            _OPT_CODE[kind],
            0 if optimizer_state is None else optimizer_state.t,
        ),
    ]
    for p in params:
        chunks.append(_array_bytes(p.weight))
        chunks.append(_array_bytes(p.bias))
    if optimizer_state is not None:
        if len(optimizer_state.layers) != len(params):
            raise ValueError("optimizer state does not match parameter count")
        for ls in optimizer_state.layers:
            chunks.append(_array_bytes(ls.m_weight))
            chunks.append(_array_bytes(ls.v_weight))
            chunks.append(_array_bytes(ls.m_bias))
            chunks.append(_array_bytes(ls.v_bias))
        if kind == "osgd":
            for ls in optimizer_state.layers:
                chunks.append(_array_bytes(ls.psi))
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointFormatError("truncated checkpoint file")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        return np.frombuffer(self.take(8 * n), dtype="<f8").reshape(shape).copy()


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint back, including any optimizer state."""
    with open(path, "rb") as f:
        blob = f.read()
    r = _Reader(blob)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointFormatError("bad magic: not a checkpoint file")
    (version, seed, n_layers) = r.unpack("<IQI")
    if version != VERSION:
        raise CheckpointVersionError(
            f"unsupported checkpoint version {version} (expected {VERSION})"
        )
    dims = r.unpack(f"<{n_layers + 1}I")
    acts = r.take(n_layers)
    if any(b not in _ACT_NAME for b in acts):
        raise CheckpointFormatError("unknown activation tag")
    if any(b != _ACT_CODE[RELU] for b in acts[:-1]) or acts[-1] != _ACT_CODE[SIGMOID]:
        raise CheckpointFormatError("unsupported activation layout")
    (opt_code, t) = r.unpack("<BQ")
    if opt_code not in _OPT_NAME:
        raise CheckpointFormatError(f"unknown optimizer tag {opt_code}")
    spec = NetworkSpec(layer_dims=tuple(int(d) for d in dims))
    params = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        params.append(
            LayerParams(weight=r.array((d_out, d_in)), bias=r.array((d_out,)))
        )
    kind = _OPT_NAME[opt_code]
    state = None
    if kind is not None:
        layers = []
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            layers.append(
                OsgdLayerState(
                    psi=None,
                    m_weight=r.array((d_out, d_in)),
                    v_weight=r.array((d_out, d_in)),
                    m_bias=r.array((d_out,)),
                    v_bias=r.array((d_out,)),
                )
            )
        if kind == "osgd":
            for ls, d_in in zip(layers, dims[:-1]):
                ls.psi = r.array((d_in, d_in))
        state = OptimizerState(kind=kind, layers=layers, t=int(t))
    if r.pos != len(blob):
        raise CheckpointFormatError("trailing bytes after checkpoint payload")
    return Checkpoint(params=params, spec=spec, optimizer_state=state, seed=int(seed))


def load_model(path) -> tuple[list[LayerParams], NetworkSpec]:
    """Model-only view of load_checkpoint."""
    ckpt = load_checkpoint(path)
    return ckpt.params, ckpt.spec
