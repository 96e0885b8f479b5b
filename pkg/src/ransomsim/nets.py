"""Actor/critic networks in plain numpy with hand-derived gradients.

No autograd.  Both networks are tanh MLPs ([obs, 200, 200, out] by
default) stored in one flat float64 buffer per network; per-layer weight
and bias arrays are views into it, so the optimizer touches a single
contiguous vector.

The actor head produces logits over the flat action space; invalid actions
are masked to -inf before the softmax.  Gradients for the clipped
surrogate objective with an entropy bonus, and for the critic's mean
squared error, are computed analytically by backpropagation:

    d log p(a) / d logits = onehot(a) - p
    d H / d logits_j      = -p_j (log p_j + H)   (0 for masked entries)
    d min(u1, u2) / d ratio = advantage * [u1 <= u2]
    d ratio / d log p     = ratio

Adam is implemented with bias correction; per-network learning rates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np


# ---------------------------------------------------------------------------
# parameter container

class Mlp:
    """Fully connected net; parameters live in one flat float64 vector.

    `weights[i]` has shape (dims[i], dims[i+1]) and `biases[i]` shape
    (dims[i+1],); both are views into `flat`.
    """

    def __init__(self, dims, flat: Optional[np.ndarray] = None):
        self.dims = tuple(int(d) for d in dims)
        if len(self.dims) < 2:
            raise ValueError("an MLP needs at least input and output dims")
        total = sum(
            self.dims[i] * self.dims[i + 1] + self.dims[i + 1]
            for i in range(len(self.dims) - 1)
        )
        if flat is None:
            flat = np.zeros(total, dtype=np.float64)
        elif flat.shape != (total,):
            raise ValueError(f"flat buffer must have {total} entries")
        self.flat = np.ascontiguousarray(flat, dtype=np.float64)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        off = 0
        for i in range(len(self.dims) - 1):
            n_in, n_out = self.dims[i], self.dims[i + 1]
            self.weights.append(self.flat[off:off + n_in * n_out].reshape(n_in, n_out))
            off += n_in * n_out
            self.biases.append(self.flat[off:off + n_out])
            off += n_out

    @property
    def n_params(self) -> int:
        return self.flat.size

    def zeros_like(self) -> "Mlp":
        return Mlp(self.dims)

    def copy(self) -> "Mlp":
        return Mlp(self.dims, self.flat.copy())


def _orthogonal(rng: np.random.RandomState, n_in: int, n_out: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # fix QR sign ambiguity
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


def init_mlp(dims, rng: np.random.RandomState, head_gain: float) -> Mlp:
    """Orthogonal weights (gain 1 hidden, `head_gain` output), zero biases."""
    net = Mlp(dims)
    last = len(net.weights) - 1
    for i, w in enumerate(net.weights):
        gain = head_gain if i == last else 1.0
        w[:] = _orthogonal(rng, w.shape[0], w.shape[1], gain)
    return net


@dataclass
class PolicyParams:
    """Actor and critic for one observation/action geometry."""

    actor: Mlp
    critic: Mlp

    @property
    def obs_dim(self) -> int:
        return self.actor.dims[0]

    @property
    def action_dim(self) -> int:
        return self.actor.dims[-1]

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.actor.copy(), self.critic.copy())


def create_policy(
    obs_dim: int, action_dim: int, seed: int = 0, hidden=(200, 200)
) -> PolicyParams:
    rng = np.random.RandomState(seed)
    actor = init_mlp((obs_dim, *hidden, action_dim), rng, head_gain=0.01)
    critic = init_mlp((obs_dim, *hidden, 1), rng, head_gain=1.0)
    return PolicyParams(actor, critic)


# ---------------------------------------------------------------------------
# forward passes

def _forward_cached(net: Mlp, x: np.ndarray):
    """Returns (output, activations); activations[i] feeds layer i."""
    acts = [x]
    h = x
    last = len(net.weights) - 1
    for i in range(last):
        h = np.tanh(h @ net.weights[i] + net.biases[i])
        acts.append(h)
    return h @ net.weights[last] + net.biases[last], acts


def mlp_forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    out, _ = _forward_cached(net, np.atleast_2d(x))
    return out if x.ndim == 2 else out[0]


def masked_distribution(logits: np.ndarray, mask: np.ndarray):
    """Softmax over valid entries only.

    Returns (probs, log_probs, entropy); log_probs is -inf at masked
    entries, probs is exactly 0 there.  Raises if any row has no valid
    action.
    """
    logits = np.atleast_2d(logits)
    mask = np.atleast_2d(mask).astype(bool)
    if not mask.any(axis=1).all():
        raise ValueError("no valid action available in at least one row")
    z = np.where(mask, logits, -np.inf)
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax  # masked entries stay -inf
    expz = np.where(mask, np.exp(np.where(mask, shifted, 0.0)), 0.0)
    total = expz.sum(axis=1, keepdims=True)
    probs = expz / total
    log_probs = np.where(mask, shifted - np.log(total), -np.inf)
    plogp = np.where(probs > 0.0, probs * np.where(mask, log_probs, 0.0), 0.0)
    entropy = -plogp.sum(axis=1)
    return probs, log_probs, entropy


@dataclass
class PolicyDistribution:
    probs: np.ndarray
    log_probs: np.ndarray
    entropy: float


def policy_forward(params: PolicyParams, features: np.ndarray, mask: np.ndarray) -> PolicyDistribution:
    """Masked action distribution for a single observation."""
    logits = mlp_forward(params.actor, np.atleast_2d(features))
    probs, logp, ent = masked_distribution(logits, np.atleast_2d(mask))
    return PolicyDistribution(probs[0], logp[0], float(ent[0]))


def value_forward(params: PolicyParams, features: np.ndarray):
    out = mlp_forward(params.critic, np.atleast_2d(features))[:, 0]
    return out if features.ndim == 2 else float(out[0])


def sample_action(dist: PolicyDistribution, rng: np.random.RandomState) -> int:
    """Inverse-CDF draw; deterministic given the RNG state."""
    cum = np.cumsum(dist.probs)
    u = rng.random_sample() * cum[-1]
    return int(min(np.searchsorted(cum, u, side="right"), dist.probs.size - 1))


def greedy_action(dist: PolicyDistribution) -> int:
    """Highest-probability action; ties break to the lowest index."""
    return int(np.argmax(dist.probs))


# ---------------------------------------------------------------------------
# losses and analytical gradients

def _backward(net: Mlp, acts, dout: np.ndarray, grad: Mlp) -> None:
    """Fill `grad` with dLoss/dparams given dLoss/doutput."""
    d = dout
    for i in range(len(net.weights) - 1, -1, -1):
        np.matmul(acts[i].T, d, out=grad.weights[i])
        grad.biases[i][:] = d.sum(axis=0)
        if i:
            d = (d @ net.weights[i].T) * (1.0 - acts[i] ** 2)


def clipped_surrogate(ratio: np.ndarray, advantages: np.ndarray, clip_eps: float) -> np.ndarray:
    """Per-sample pessimistic surrogate: min(r*A, clip(r, 1-eps, 1+eps)*A)."""
    u1 = ratio * advantages
    u2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    return np.minimum(u1, u2)


def actor_loss(
    actor: Mlp, feats, masks, actions, old_log_probs, advantages,
    clip_eps: float, entropy_coef: float,
) -> float:
    """Forward-only evaluation of the clipped surrogate + entropy objective."""
    logits, _ = _forward_cached(actor, feats)
    probs, logp, ent = masked_distribution(logits, masks)
    lp = logp[np.arange(len(actions)), actions]
    ratio = np.exp(lp - old_log_probs)
    surr = clipped_surrogate(ratio, advantages, clip_eps)
    return float(-(surr.mean() + entropy_coef * ent.mean()))


def backprop_actor(
    actor: Mlp, feats, masks, actions, old_log_probs, advantages,
    clip_eps: float, entropy_coef: float,
):
    """Analytical gradient of the actor objective.

    Returns (grad, stats) with stats = {actor_loss, entropy, clip_fraction}.
    """
    N = feats.shape[0]
    logits, acts = _forward_cached(actor, feats)
    probs, logp, ent = masked_distribution(logits, masks)
    rows = np.arange(N)
    lp = logp[rows, actions]
    ratio = np.exp(lp - old_log_probs)
    u1 = ratio * advantages
    u2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    surrogate = clipped_surrogate(ratio, advantages, clip_eps)
    loss = -(surrogate.mean() + entropy_coef * ent.mean())

    # d surrogate_i / d logp_i: zero when the clipped branch is active
    unclipped = u1 <= u2
    coef = np.where(unclipped, advantages * ratio, 0.0)
    dlogits = -probs * coef[:, None]
    dlogits[rows, actions] += coef
    # entropy term: dH/dz_j = -p_j (log p_j + H)
    valid = masks.astype(bool)
    safe_logp = np.where(valid, logp, 0.0)
    dent = -probs * (safe_logp + ent[:, None])
    dlogits += entropy_coef * dent
    dlogits *= -1.0 / N

    grad = actor.zeros_like()
    _backward(actor, acts, dlogits, grad)
    stats = {
        "actor_loss": float(loss),
        "entropy": float(ent.mean()),
        "clip_fraction": float(np.mean(u2 < u1)),
    }
    return grad, stats


def critic_loss(critic: Mlp, feats, targets) -> float:
    """Forward-only mean squared error of the value head."""
    values, _ = _forward_cached(critic, feats)
    return float(((values[:, 0] - targets) ** 2).mean())


def backprop_critic(critic: Mlp, feats, targets):
    """Analytical gradient of the value MSE.  Returns (grad, loss)."""
    N = feats.shape[0]
    values, acts = _forward_cached(critic, feats)
    err = values[:, 0] - targets
    loss = float((err ** 2).mean())
    dout = (2.0 / N) * err[:, None]
    grad = critic.zeros_like()
    _backward(critic, acts, dout, grad)
    return grad, loss


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    """First/second moment buffers plus step counter for one network."""

    m: np.ndarray
    v: np.ndarray
    lr: float
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: Mlp, lr: float) -> "AdamState":
        return cls(m=np.zeros(net.n_params), v=np.zeros(net.n_params), lr=lr)

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.lr, self.t,
                         self.beta1, self.beta2, self.eps)


@dataclass
class OptimizerState:
    actor: AdamState
    critic: AdamState

    @classmethod
    def create(cls, params: PolicyParams, lr_actor: float, lr_critic: float) -> "OptimizerState":
        return cls(AdamState.for_net(params.actor, lr_actor),
                   AdamState.for_net(params.critic, lr_critic))


def adam_step(flat_params: np.ndarray, flat_grads: np.ndarray, state: AdamState) -> None:
    """One bias-corrected Adam update, in place."""
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * flat_grads
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * np.square(flat_grads)
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    flat_params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: PolicyParams, opt: Optional[OptimizerState] = None,
                    meta: Optional[dict] = None) -> None:
    arrays = {
        "version": np.int64(CHECKPOINT_VERSION),
        "actor_dims": np.array(params.actor.dims, dtype=np.int64),
        "critic_dims": np.array(params.critic.dims, dtype=np.int64),
        "actor_flat": params.actor.flat,
        "critic_flat": params.critic.flat,
        "meta_json": np.bytes_(json.dumps(meta or {}, sort_keys=True).encode()),
    }
    if opt is not None:
        arrays.update(
            opt_actor_m=opt.actor.m, opt_actor_v=opt.actor.v,
            opt_actor_t=np.int64(opt.actor.t), opt_actor_lr=np.float64(opt.actor.lr),
            opt_critic_m=opt.critic.m, opt_critic_v=opt.critic.v,
            opt_critic_t=np.int64(opt.critic.t), opt_critic_lr=np.float64(opt.critic.lr),
        )
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Returns (params, optimizer_state_or_None, meta)."""
    with np.load(path) as data:
        if int(data["version"]) != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {int(data['version'])}")
        actor = Mlp(tuple(data["actor_dims"]), data["actor_flat"].copy())
        critic = Mlp(tuple(data["critic_dims"]), data["critic_flat"].copy())
        params = PolicyParams(actor, critic)
        meta = json.loads(bytes(data["meta_json"]).decode())
        opt = None
        if "opt_actor_m" in data:
            opt = OptimizerState(
                AdamState(data["opt_actor_m"].copy(), data["opt_actor_v"].copy(),
                          float(data["opt_actor_lr"]), int(data["opt_actor_t"])),
                AdamState(data["opt_critic_m"].copy(), data["opt_critic_v"].copy(),
                          float(data["opt_critic_lr"]), int(data["opt_critic_t"])),
            )
    return params, opt, meta


def ensure_dims(params: PolicyParams, obs_dim: int, action_dim: int) -> None:
    """Reject a checkpoint trained against a different scenario geometry."""
    if params.obs_dim != obs_dim or params.action_dim != action_dim:
        raise ValueError(
            f"checkpoint geometry (obs={params.obs_dim}, actions={params.action_dim}) "
            f"does not match the scenario (obs={obs_dim}, actions={action_dim})"
        )
