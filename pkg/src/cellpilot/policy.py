"""The Gaussian policy network and its training mechanics, written against
numpy directly: forward pass, analytic REINFORCE gradients (verified by
finite differences in the test suite), an adaptive optimizer with
decoupled weight decay, global-norm gradient clipping, heuristic warm
start, and bit-exact checkpoint serialization.

Architecture: obs -> hidden (tanh) -> hidden (tanh) -> 12 sigmoid outputs;
the first 6 outputs are the action means in normalized [0,1] units, the
last 6 are raw standard deviations scaled by SIGMA_CAP downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .container import load_container, save_container
from .rlenv import BaselineTable, normalize_params
from .reselect import ReselectionParams

N_OUT = 12          # 6 means + 6 raw sigmas
N_PARAMS = 6
SIGMA_CAP = 0.1     # normalized-action std cap
SIGMA_MIN = 1e-3    # floor keeping log-densities finite
LOGIT_CLAMP = 8.0   # warm-start bias clamp for range-endpoint presets
LOG_2PI = math.log(2.0 * math.pi)

CHECKPOINT_VERSION = 1
CHECKPOINT_KIND = "cellpilot-checkpoint"

WEIGHT_NAMES = ("w1", "w2", "w3")
PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")


class PolicyError(Exception):
    pass


@dataclass
class PolicyNet:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    @property
    def obs_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in PARAM_NAMES}


def init_policy(obs_dim: int, hidden: int = 1024, seed: int = 0) -> PolicyNet:
    """Scaled uniform fan-in init U(+/- 1/sqrt(fan_in)); biases zero."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))

    def u(fan_in, shape):
        lim = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-lim, lim, size=shape)
    return PolicyNet(
        w1=u(obs_dim, (obs_dim, hidden)), b1=np.zeros(hidden),
        w2=u(hidden, (hidden, hidden)), b2=np.zeros(hidden),
        w3=u(hidden, (hidden, N_OUT)), b3=np.zeros(N_OUT),
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(net: PolicyNet, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray, tuple]:
    """(mu, sigma_raw, cached activations) for a single observation."""
    obs = np.asarray(obs, dtype=float).ravel()
    if obs.shape[0] != net.obs_dim:
        raise PolicyError(
            f"observation length {obs.shape[0]} != expected {net.obs_dim}")
    a1 = np.tanh(obs @ net.w1 + net.b1)
    a2 = np.tanh(a1 @ net.w2 + net.b2)
    out = _sigmoid(a2 @ net.w3 + net.b3)
    return out[:N_PARAMS], out[N_PARAMS:], (obs, a1, a2, out)


def _forward_batch(net: PolicyNet, x: np.ndarray):
    a1 = np.tanh(x @ net.w1 + net.b1)
    a2 = np.tanh(a1 @ net.w2 + net.b2)
    out = _sigmoid(a2 @ net.w3 + net.b3)
    return a1, a2, out


def effective_sigma(sigma_raw: np.ndarray) -> np.ndarray:
    return np.maximum(SIGMA_CAP * np.asarray(sigma_raw, dtype=float), SIGMA_MIN)


def sample_action(mu: np.ndarray, sigma_raw: np.ndarray,
                  rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Draw the 6 parameter values and return the 12-value raw action
    (sample ++ sigma_raw) with its log-probability over the 6 draws.
    The sample is left unclipped here; mapping clips to [0,1]."""
    sigma = effective_sigma(sigma_raw)
    eps = rng.standard_normal(N_PARAMS)
    a = mu + sigma * eps
    logp = float(np.sum(-0.5 * eps ** 2 - np.log(sigma) - 0.5 * LOG_2PI))
    return np.concatenate([a, sigma_raw]), logp


def log_prob(mu: np.ndarray, sigma_raw: np.ndarray, action6: np.ndarray) -> float:
    sigma = effective_sigma(sigma_raw)
    z = (np.asarray(action6, dtype=float) - mu) / sigma
    return float(np.sum(-0.5 * z ** 2 - np.log(sigma) - 0.5 * LOG_2PI))


def reinforce_backward(net: PolicyNet, records) -> dict[str, np.ndarray]:
    """Gradient of L = -sum_j r_j * log pi(a_j | s_j).

    `records` is a sequence of (obs, raw_action_12, reward). The stored
    action's first half is the unclipped Gaussian sample; its second half
    (sigma_raw at sample time) is not part of the density.
    """
    if len(records) == 0:
        raise PolicyError("reinforce_backward needs at least one record")
    x = np.stack([np.asarray(r[0], dtype=float) for r in records])
    act = np.stack([np.asarray(r[1], dtype=float)[:N_PARAMS] for r in records])
    rew = np.array([float(r[2]) for r in records])
    a1, a2, out = _forward_batch(net, x)
    mu = out[:, :N_PARAMS]
    sr = out[:, N_PARAMS:]
    sigma = np.maximum(SIGMA_CAP * sr, SIGMA_MIN)
    diff = act - mu
    dlogp_dmu = diff / sigma ** 2
    dlogp_dsigma = diff ** 2 / sigma ** 3 - 1.0 / sigma
    dsigma_dsr = np.where(SIGMA_CAP * sr > SIGMA_MIN, SIGMA_CAP, 0.0)
    dl_dout = np.empty_like(out)
    dl_dout[:, :N_PARAMS] = -rew[:, None] * dlogp_dmu
    dl_dout[:, N_PARAMS:] = -rew[:, None] * dlogp_dsigma * dsigma_dsr
    bad = ~np.isfinite(dl_dout).all(axis=1)
    if bad.any():
        raise PolicyError(f"non-finite gradient at record {int(np.flatnonzero(bad)[0])}")
    dz3 = dl_dout * out * (1.0 - out)
    gw3 = a2.T @ dz3
    gb3 = dz3.sum(axis=0)
    da2 = dz3 @ net.w3.T
    dz2 = da2 * (1.0 - a2 ** 2)
    gw2 = a1.T @ dz2
    gb2 = dz2.sum(axis=0)
    da1 = dz2 @ net.w2.T
    dz1 = da1 * (1.0 - a1 ** 2)
    gw1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    return {"w1": gw1, "b1": gb1, "w2": gw2, "b2": gb2, "w3": gw3, "b3": gb3}


def reinforce_loss(net: PolicyNet, records) -> float:
    """Scalar L = -sum_j r_j log pi; the finite-difference oracle target."""
    total = 0.0
    for obs, action, r in records:
        mu, sr, _ = forward(net, obs)
        total -= float(r) * log_prob(mu, sr, np.asarray(action)[:N_PARAMS])
    return total


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

@dataclass
class OptimizerState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4   # decoupled, applied to weights only
    clip: float = 10.0           # global l2-norm threshold
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def init_optimizer(net: PolicyNet, lr: float = 1e-4, weight_decay: float = 1e-4,
                   clip: float = 10.0) -> OptimizerState:
    opt = OptimizerState(lr=lr, weight_decay=weight_decay, clip=clip)
    for name, p in net.params().items():
        opt.m[name] = np.zeros_like(p)
        opt.v[name] = np.zeros_like(p)
    return opt


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(math.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def apply_update(net: PolicyNet, opt: OptimizerState,
                 grads: dict[str, np.ndarray]) -> float:
    """One clipped, bias-corrected adaptive step with decoupled weight
    decay on the weight matrices; returns the pre-clip global norm."""
    norm = global_norm(grads)
    scale = opt.clip / norm if norm > opt.clip else 1.0
    opt.step += 1
    bc1 = 1.0 - opt.beta1 ** opt.step
    bc2 = 1.0 - opt.beta2 ** opt.step
    for name, p in net.params().items():
        g = grads[name] * scale
        opt.m[name] = opt.beta1 * opt.m[name] + (1.0 - opt.beta1) * g
        opt.v[name] = opt.beta2 * opt.v[name] + (1.0 - opt.beta2) * g * g
        step = opt.lr * (opt.m[name] / bc1) / (np.sqrt(opt.v[name] / bc2) + opt.eps)
        p -= step
        if name in WEIGHT_NAMES and opt.weight_decay:
            p -= opt.lr * opt.weight_decay * p
    return norm


# ---------------------------------------------------------------------------
# Warm start
# ---------------------------------------------------------------------------

def logit(u: float) -> float:
    if u <= 0.0:
        return -LOGIT_CLAMP
    if u >= 1.0:
        return LOGIT_CLAMP
    return min(max(math.log(u / (1.0 - u)), -LOGIT_CLAMP), LOGIT_CLAMP)


def warm_start(net: PolicyNet, params: ReselectionParams) -> PolicyNet:
    """Write the preset into the mean-head output biases (zeroing those
    heads' input weights so the initial mean action is exact and input-
    independent); sigma-head biases start at 0 so the initial exploration
    std sits near SIGMA_CAP/2."""
    u = normalize_params(params)
    net.b3[:N_PARAMS] = [logit(float(v)) for v in u]
    net.w3[:, :N_PARAMS] = 0.0
    net.b3[N_PARAMS:] = 0.0
    return net


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    net: PolicyNet
    opt: OptimizerState
    baselines: BaselineTable
    rng_state: dict | None
    meta: dict


def save_checkpoint(path, net: PolicyNet, opt: OptimizerState,
                    baselines: BaselineTable, rng_state: dict | None,
                    extra: dict) -> None:
    arrays = {f"net_{n}": p for n, p in net.params().items()}
    for n in PARAM_NAMES:
        arrays[f"opt_m_{n}"] = opt.m[n]
        arrays[f"opt_v_{n}"] = opt.v[n]
    arrays.update(baselines.to_arrays())
    meta = {
        "kind": CHECKPOINT_KIND,
        "version": CHECKPOINT_VERSION,
        "obs_dim": net.obs_dim,
        "hidden": net.hidden,
        "opt": {"lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2,
                "eps": opt.eps, "weight_decay": opt.weight_decay,
                "clip": opt.clip, "step": opt.step},
        "baseline_window": baselines.window,
        "rng_state": rng_state,
        "extra": extra,
    }
    save_container(path, meta, arrays)


def load_checkpoint(path) -> Checkpoint:
    meta, arrays = load_container(path)
    if meta.get("kind") != CHECKPOINT_KIND:
        raise PolicyError(f"{path}: not a checkpoint file")
    if meta.get("version") != CHECKPOINT_VERSION:
        raise PolicyError(
            f"{path}: checkpoint version {meta.get('version')} unsupported "
            f"(expected {CHECKPOINT_VERSION})")
    net = PolicyNet(**{n: arrays[f"net_{n}"] for n in PARAM_NAMES})
    o = meta["opt"]
    opt = OptimizerState(lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"],
                         eps=o["eps"], weight_decay=o["weight_decay"],
                         clip=o["clip"], step=o["step"])
    for n in PARAM_NAMES:
        opt.m[n] = arrays[f"opt_m_{n}"]
        opt.v[n] = arrays[f"opt_v_{n}"]
    baselines = BaselineTable.from_arrays(meta["baseline_window"], arrays) \
        if "bl_seeds" in arrays else BaselineTable(meta["baseline_window"])
    return Checkpoint(net, opt, baselines, meta.get("rng_state"), meta["extra"])
