"""Factorized categorical policies over token slots.

Two modes. "independent": one logit vector per slot, no conditioning; the
log-prob gradient per slot is the closed form (one-hot - softmax).
"recurrent": a small tanh cell conditions each slot's logits on the tokens
sampled so far (per-slot embeddings and output heads, shared cell weights);
gradients come from backprop through the cell. Both gradients are checked
against finite differences in the test suite.

Parameters live in a plain dict[str, ndarray] so updates, checkpoints and
finite-difference probing all share one representation.
"""

from __future__ import annotations

import numpy as np

Params = dict[str, np.ndarray]


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z))
    return e / e.sum()


def zero_like(params: Params) -> Params:
    return {k: np.zeros_like(v) for k, v in params.items()}


def add_scaled(dst: Params, src: Params, scale: float) -> None:
    for k, v in src.items():
        dst[k] += scale * v


def _entropy_dlogits(p: np.ndarray) -> np.ndarray:
    """d/dlogits of H(softmax(logits)) = -p * (log p + H)."""
    logp = np.log(p)
    h = -float(p @ logp)
    return -p * (logp + h)


class IndependentPolicy:
    mode = "independent"

    def __init__(self, arities, params: Params | None = None):
        self.arities = tuple(arities)
        if params is None:
            params = {f"logits_{t}": np.zeros(a) for t, a in enumerate(self.arities)}
        self.params = params

    def _probs(self, t: int) -> np.ndarray:
        return softmax(self.params[f"logits_{t}"])

    def sample(self, rng: np.random.Generator) -> tuple[int, ...]:
        return tuple(
            int(rng.choice(a, p=self._probs(t))) for t, a in enumerate(self.arities))

    def log_prob(self, tokens) -> float:
        total = 0.0
        for t, tok in enumerate(tokens):
            p = self._probs(t)
            total += float(np.log(p[tok]))
        return total

    def weighted_grad(self, tokens, logp_weight: float,
                      entropy_weight: float = 0.0) -> tuple[float, Params]:
        """Returns (log_prob, gradient of logp_weight*logp + entropy_weight*H)."""
        grads: Params = {}
        logp = 0.0
        for t, tok in enumerate(tokens):
            p = self._probs(t)
            logp += float(np.log(p[tok]))
            onehot = np.zeros_like(p)
            onehot[tok] = 1.0
            d = logp_weight * (onehot - p)
            if entropy_weight != 0.0:
                d = d + entropy_weight * _entropy_dlogits(p)
            grads[f"logits_{t}"] = d
        return logp, grads


class RecurrentPolicy:
    mode = "recurrent"

    def __init__(self, arities, embed_dim: int = 8, hidden_dim: int = 64,
                 params: Params | None = None,
                 rng: np.random.Generator | None = None, init_scale: float = 0.1):
        self.arities = tuple(arities)
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        if params is None:
            rng = rng or np.random.default_rng(0)
            params = {
                "W_xh": init_scale * rng.standard_normal((hidden_dim, embed_dim)),
                "W_hh": init_scale * rng.standard_normal((hidden_dim, hidden_dim)),
                "b_h": np.zeros(hidden_dim),
            }
            for t, a in enumerate(self.arities):
                params[f"embed_{t}"] = init_scale * rng.standard_normal((a, embed_dim))
                # zero output heads give a uniform initial policy
                params[f"W_out_{t}"] = np.zeros((a, hidden_dim))
                params[f"b_out_{t}"] = np.zeros(a)
        self.params = params

    def _forward(self, tokens=None, rng: np.random.Generator | None = None):
        """Run the cell; samples when tokens is None. Returns the trace
        needed for backprop."""
        p = self.params
        n = len(self.arities)
        h = np.zeros(self.hidden_dim)
        hs, probs, xs, out = [], [], [], []
        for t in range(n):
            logits = p[f"W_out_{t}"] @ h + p[f"b_out_{t}"]
            pt = softmax(logits)
            tok = int(rng.choice(self.arities[t], p=pt)) if tokens is None else int(tokens[t])
            hs.append(h)
            probs.append(pt)
            out.append(tok)
            if t < n - 1:  # the cell after the last slot never feeds logits
                x = p[f"embed_{t}"][tok]
                h = np.tanh(p["W_xh"] @ x + p["W_hh"] @ h + p["b_h"])
                xs.append(x)
        return tuple(out), hs, probs, xs

    def sample(self, rng: np.random.Generator) -> tuple[int, ...]:
        return self._forward(rng=rng)[0]

    def log_prob(self, tokens) -> float:
        _, _, probs, _ = self._forward(tokens)
        return float(sum(np.log(pt[tok]) for pt, tok in zip(probs, tokens)))

    def weighted_grad(self, tokens, logp_weight: float,
                      entropy_weight: float = 0.0) -> tuple[float, Params]:
        p = self.params
        toks, hs, probs, xs = self._forward(tokens)
        n = len(self.arities)
        grads = zero_like(p)
        logp = float(sum(np.log(pt[tok]) for pt, tok in zip(probs, toks)))

        dh = np.zeros(self.hidden_dim)
        for t in range(n - 1, -1, -1):
            if t < n - 1:
                # cell t mapped hs[t] -> hs[t+1] using xs[t]
                h_next = hs[t + 1]
                dpre = dh * (1.0 - h_next * h_next)
                grads["W_xh"] += np.outer(dpre, xs[t])
                grads["W_hh"] += np.outer(dpre, hs[t])
                grads["b_h"] += dpre
                grads[f"embed_{t}"][toks[t]] += p["W_xh"].T @ dpre
                dh = p["W_hh"].T @ dpre
            else:
                dh = np.zeros(self.hidden_dim)
            pt = probs[t]
            onehot = np.zeros_like(pt)
            onehot[toks[t]] = 1.0
            dlogits = logp_weight * (onehot - pt)
            if entropy_weight != 0.0:
                dlogits = dlogits + entropy_weight * _entropy_dlogits(pt)
            grads[f"W_out_{t}"] += np.outer(dlogits, hs[t])
            grads[f"b_out_{t}"] += dlogits
            dh = dh + p[f"W_out_{t}"].T @ dlogits
        return logp, grads


Policy = IndependentPolicy | RecurrentPolicy


def make_policy(arities, mode: str = "independent",
                rng: np.random.Generator | None = None,
                embed_dim: int = 8, hidden_dim: int = 64) -> Policy:
    if mode == "independent":
        return IndependentPolicy(arities)
    if mode == "recurrent":
        return RecurrentPolicy(arities, embed_dim=embed_dim,
                               hidden_dim=hidden_dim, rng=rng)
    raise ValueError(f"unknown policy mode {mode!r}")


def policy_to_json(policy: Policy) -> dict:
    doc = {
        "mode": policy.mode,
        "arities": list(policy.arities),
        "params": {k: v.tolist() for k, v in sorted(policy.params.items())},
    }
    if policy.mode == "recurrent":
        doc["embed_dim"] = policy.embed_dim
        doc["hidden_dim"] = policy.hidden_dim
    return doc


def policy_from_json(doc: dict) -> Policy:
    params = {k: np.asarray(v, dtype=float) for k, v in doc["params"].items()}
    if doc["mode"] == "independent":
        return IndependentPolicy(doc["arities"], params=params)
    return RecurrentPolicy(doc["arities"], embed_dim=doc["embed_dim"],
                           hidden_dim=doc["hidden_dim"], params=params)
