"""Stochastic optimizers for the detector network.

The orthogonal-projection optimizer keeps one projection matrix psi per layer,
updated from the stream of layer inputs by a recursive-least-squares rank-1
recursion. Weight gradients are multiplied by psi before entering Adam-style
moment updates, so weights move mostly in directions orthogonal to the input
subspace already seen; previously learned responses are preserved. A plain
Adam path (psi fixed at identity, same learning-rate clipping) is the
training baseline, and unscheduled vanilla SGD is kept for unit tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import LayerGrads, LayerParams


@dataclass(frozen=True)
class OptimizerConfig:
    """Shared hyperparameters. Defaults are the recommended operating point:
    eta_i 1e-3, eta_l 1e-5, lam 1, beta 100, beta1 0.9, beta2 0.999,
    epsilon 1e-8. `lam` is the RLS forgetting factor (1 = no discounting)
    and `beta` scales the psi initialization I/beta."""

    eta_i: float = 1e-3
    eta_l: float = 1e-5
    lam: float = 1.0
    beta: float = 100.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not (self.eta_i >= self.eta_l > 0):
            raise ValueError("need eta_i >= eta_l > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class OsgdLayerState:
    """Per-layer optimizer memory: projection matrix over the layer-input
    space (None on the plain-Adam path) plus first/second moments shaped
    like the layer's gradients."""

    psi: np.ndarray | None
    m_weight: np.ndarray
    v_weight: np.ndarray
    m_bias: np.ndarray
    v_bias: np.ndarray


@dataclass
class OptimizerState:
    """Full optimizer memory: one layer state each plus the global step
    counter t shared by every layer."""

    kind: str  # "osgd" or "adam"
    layers: list[OsgdLayerState]
    t: int = 0


@dataclass(frozen=True)
class StepReport:
    """Per-step diagnostics."""

    effective_lr: float
    psi_trace: float
    grad_norm_before: float
    grad_norm_after: float


def init_state(params: list[LayerParams], cfg: OptimizerConfig, kind: str) -> OptimizerState:
    """Fresh optimizer state: psi = I/beta per layer for "osgd", no psi for
    "adam"; zero moments; t = 0."""
    if kind not in ("osgd", "adam"):
        raise ValueError(f"unknown optimizer kind {kind!r}")
    layers = []
    for p in params:
        d_in = p.weight.shape[1]
        layers.append(
            OsgdLayerState(
                psi=np.eye(d_in) / cfg.beta if kind == "osgd" else None,
                m_weight=np.zeros_like(p.weight),
                v_weight=np.zeros_like(p.weight),
                m_bias=np.zeros_like(p.bias),
                v_bias=np.zeros_like(p.bias),
            )
        )
    return OptimizerState(kind=kind, layers=layers, t=0)


def lr_schedule(t: int, cfg: OptimizerConfig) -> float:
    """Fourth-root decay with a floor: eta_t = max(eta_i / t**(1/4), eta_l)."""
    if t < 1:
        raise ValueError("step counter must be >= 1")
    return max(cfg.eta_i / float(t) ** 0.25, cfg.eta_l)


def psi_update(state: OsgdLayerState, c, cfg: OptimizerConfig) -> OsgdLayerState:
    """RLS rank-1 update of the projection matrix with layer input c:

        p   = psi c / (lam + c^T psi c)
        psi = (psi - p c^T psi) / lam

    followed by symmetrization, which exact arithmetic would preserve but
    floating point does not.
    """
    if state.psi is None:
        raise ValueError("layer state carries no projection matrix")
    c = np.asarray(c, dtype=np.float64)
    psi = state.psi
    if c.shape != (psi.shape[0],):
        raise ValueError(f"input shape {c.shape} != psi dimension {psi.shape[0]}")
    pc = psi @ c
    p = pc / (cfg.lam + c @ pc)
    psi = (psi - np.outer(p, c @ psi)) / cfg.lam
    state.psi = (psi + psi.T) * 0.5
    return state


def project_gradient(weight_grad, psi) -> np.ndarray:
    """Project a weight gradient onto the unoccupied input subspace:
    grad @ psi^T. Bias gradients are never projected; psi lives in the
    layer-input space and has no matching shape for them."""
    weight_grad = np.asarray(weight_grad)
    if weight_grad.shape[1] != psi.shape[0]:
        raise ValueError(
            f"gradient inner dim {weight_grad.shape[1]} != psi dim {psi.shape[0]}"
        )
    return weight_grad @ psi.T


def _adam_update(p: LayerParams, ls: OsgdLayerState, gw, gb, t: int, eta: float, cfg: OptimizerConfig):
    """Moment update and parameter step shared by the adam and osgd paths."""
    b1, b2 = cfg.beta1, cfg.beta2
    ls.m_weight = b1 * ls.m_weight + (1.0 - b1) * gw
    ls.v_weight = b2 * ls.v_weight + (1.0 - b2) * gw * gw
    ls.m_bias = b1 * ls.m_bias + (1.0 - b1) * gb
    ls.v_bias = b2 * ls.v_bias + (1.0 - b2) * gb * gb
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    p.weight -= eta * (ls.m_weight / c1) / (cfg.epsilon + np.sqrt(ls.v_weight / c2))
    p.bias -= eta * (ls.m_bias / c1) / (cfg.epsilon + np.sqrt(ls.v_bias / c2))


def _check_step_args(params, grads, state):
    if not (len(params) == len(grads) == len(state.layers)):
        raise ValueError("params, grads and state must have one entry per layer")
    for p, g in zip(params, grads):
        if p.weight.shape != g.weight.shape or p.bias.shape != g.bias.shape:
            raise ValueError("gradient shapes do not match parameters")


def osgd_step(
    params: list[LayerParams],
    grads: list[LayerGrads],
    layer_inputs,
    state: OptimizerState,
    cfg: OptimizerConfig,
) -> StepReport:
    """One orthogonal-projection step, in place.

    Per layer: psi absorbs this step's layer input (batch mean), the weight
    gradient is projected by the fresh psi, and both the projected weight
    gradient and the raw bias gradient go through bias-corrected Adam
    moments with the clipped learning rate. t advances once for all layers.
    """
    _check_step_args(params, grads, state)
    if len(layer_inputs) != len(params):
        raise ValueError("need one layer input per layer")
    state.t += 1
    t = state.t
    eta = lr_schedule(t, cfg)
    sq_before = 0.0
    sq_after = 0.0
    trace = 0.0
    for p, g, c, ls in zip(params, grads, layer_inputs, state.layers):
        psi_update(ls, c, cfg)
        gw = project_gradient(g.weight, ls.psi)
        sq_before += float(np.sum(g.weight * g.weight))
        sq_after += float(np.sum(gw * gw))
        trace += float(np.trace(ls.psi))
        _adam_update(p, ls, gw, g.bias, t, eta, cfg)
    return StepReport(
        effective_lr=eta,
        psi_trace=trace,
        grad_norm_before=np.sqrt(sq_before),
        grad_norm_after=np.sqrt(sq_after),
    )


def adam_step(
    params: list[LayerParams],
    grads: list[LayerGrads],
    state: OptimizerState,
    cfg: OptimizerConfig,
) -> StepReport:
    """One Adam step with the same clipped learning rate, in place. Equals
    osgd_step with psi pinned to the identity and no psi updates."""
    _check_step_args(params, grads, state)
    state.t += 1
    t = state.t
    eta = lr_schedule(t, cfg)
    sq = 0.0
    trace = 0.0
    for p, g, ls in zip(params, grads, state.layers):
        sq += float(np.sum(g.weight * g.weight))
        trace += p.weight.shape[1]  # tr(I) on this path
        _adam_update(p, ls, g.weight, g.bias, t, eta, cfg)
    gn = np.sqrt(sq)
    return StepReport(
        effective_lr=eta, psi_trace=trace, grad_norm_before=gn, grad_norm_after=gn
    )


def sgd_step(params: list[LayerParams], grads: list[LayerGrads], learning_rate: float):
    """Vanilla first-order step, in place: w -= eta * grad."""
    if len(params) != len(grads):
        raise ValueError("params and grads must have one entry per layer")
    for p, g in zip(params, grads):
        if p.weight.shape != g.weight.shape or p.bias.shape != g.bias.shape:
            raise ValueError("gradient shapes do not match parameters")
        p.weight -= learning_rate * g.weight
        p.bias -= learning_rate * g.bias


def batch_projector(history, alpha: float) -> np.ndarray:
    """Direct projector onto the complement of a history matrix's column
    space: I - A (A^T A + alpha I)^-1 A^T. Test oracle for the iterative
    psi recursion (with lam = 1 and alpha = beta they agree up to the
    1/beta scale); not used in training."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    a = np.asarray(history, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("history must be a (d, T) matrix")
    d, n = a.shape
    if n == 0:
        return np.eye(d)
    inner = a.T @ a + alpha * np.eye(n)
    return np.eye(d) - a @ np.linalg.solve(inner, a.T)
