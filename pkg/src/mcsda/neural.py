"""Small feedforward stack with hand-written backprop.

The experiments only need a fixed architecture: a feature map psi made of
affine layers each followed by tanh, and one or more linear heads on top of
the shared features.  Scoring heads are centered (scores minus their row
mean) before any margin computation; softmax-based losses are shift
invariant, so their gradients are taken with respect to the raw head
outputs and already sum to zero per row.

Gradients flow through an explicit cache (inputs, per-layer activations,
head outputs).  ``MlpScorer.backward`` accepts per-head gradient matrices
with respect to the raw head outputs plus an optional direct gradient on
the features, and returns a dict of parameter gradients; it is audited
against central finite differences in the tests.

Optimization is plain SGD with momentum (v <- m v + g; theta <- theta -
lr * v), a per-parameter learning-rate multiplier (heads train at 10x the
feature map), and the standard annealed schedules for the learning rate
and the adversarial weight.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

__all__ = [
    "Schedules",
    "lr_schedule",
    "lambda_schedule",
    "MlpScorer",
    "ForwardCache",
    "SgdMomentum",
    "grad_reversal_step",
    "center_scores",
    "center_score_grad",
]

HEAD_LR_MULT = 10.0


@dataclass(frozen=True)
class Schedules:
    """Annealing constants shared by all trainers."""

    eta0: float = 0.01
    alpha: float = 10.0
    beta: float = 0.75
    gamma: float = 10.0
    momentum: float = 0.9

    def __post_init__(self) -> None:
        if self.eta0 <= 0 or self.alpha < 0 or self.beta < 0 or self.gamma <= 0:
            raise ValueError("schedule constants out of range: %r" % (self,))
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1), got %r" % self.momentum)


def _check_progress(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError("training progress must lie in [0, 1], got %r" % p)
    return p


def lr_schedule(p: float, s: Schedules) -> float:
    """Annealed learning rate eta0 / (1 + alpha p)^beta at progress p in [0,1]."""
    p = _check_progress(p)
    return s.eta0 / (1.0 + s.alpha * p) ** s.beta


def lambda_schedule(p: float, s: Schedules) -> float:
    """Adversarial weight 2 / (1 + exp(-gamma p)) - 1, ramping 0 -> 1."""
    p = _check_progress(p)
    return 2.0 / (1.0 + np.exp(-s.gamma * p)) - 1.0


def center_scores(raw: np.ndarray) -> np.ndarray:
    """Project raw head outputs onto sum-to-zero rows."""
    return raw - raw.mean(axis=-1, keepdims=True)


def center_score_grad(g: np.ndarray) -> np.ndarray:
    """Pull a gradient on centered scores back to the raw head outputs."""
    return g - g.mean(axis=-1, keepdims=True)


@dataclass
class _Head:
    w: np.ndarray  # [out, in]
    b: np.ndarray  # [out]
    center: bool


@dataclass
class ForwardCache:
    """Everything backward() needs from one forward pass."""

    x: np.ndarray
    acts: list[np.ndarray]  # per psi layer, post-tanh; acts[-1] are the features
    raw: dict[str, np.ndarray]

    @property
    def feats(self) -> np.ndarray:
        return self.acts[-1]

    def centered(self, name: str) -> np.ndarray:
        return center_scores(self.raw[name])


def _uniform_init(rng: np.random.Generator, out_dim: int, in_dim: int):
    bound = 1.0 / np.sqrt(in_dim)
    w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
    b = rng.uniform(-bound, bound, size=out_dim)
    return w, b


class MlpScorer:
    """tanh MLP feature map with named linear heads.

    ``heads`` maps a head name to (out_dim, center).  Parameters live in an
    ordered dict keyed ``psi{i}.w`` / ``psi{i}.b`` / ``head:{name}.w`` /
    ``head:{name}.b`` so optimizers and checkpoints can address them flatly.
    """

    def __init__(
        self,
        in_dim: int,
        heads: Mapping[str, tuple[int, bool]],
        hidden: tuple[int, ...] = (32, 32),
        feature_dim: int = 16,
        seed: int = 0,
    ) -> None:
        if in_dim < 1 or feature_dim < 1 or any(h < 1 for h in hidden):
            raise ValueError("layer widths must be positive")
        self.in_dim = int(in_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.feature_dim = int(feature_dim)
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        self._psi: list[tuple[np.ndarray, np.ndarray]] = []
        dims = (self.in_dim,) + self.hidden + (self.feature_dim,)
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            self._psi.append(_uniform_init(rng, d_out, d_in))
        self._heads: dict[str, _Head] = {}
        for name, (out_dim, center) in heads.items():
            w, b = _uniform_init(rng, int(out_dim), self.feature_dim)
            self._heads[name] = _Head(w, b, bool(center))
        self._rng = rng  # retained for head re-dimensioning

    # -- parameter plumbing -------------------------------------------------

    @property
    def head_names(self) -> tuple[str, ...]:
        return tuple(self._heads)

    def head_dim(self, name: str) -> int:
        return self._heads[name].w.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        """Live parameter arrays, keyed; mutate in place to update the model."""
        out: dict[str, np.ndarray] = {}
        for i, (w, b) in enumerate(self._psi):
            out["psi%d.w" % i] = w
            out["psi%d.b" % i] = b
        for name, head in self._heads.items():
            out["head:%s.w" % name] = head.w
            out["head:%s.b" % name] = head.b
        return out

    def lr_multipliers(self) -> dict[str, float]:
        """Heads train at HEAD_LR_MULT times the feature-map learning rate."""
        return {
            name: (HEAD_LR_MULT if name.startswith("head:") else 1.0)
            for name in self.params()
        }

    def n_params(self) -> int:
        return sum(p.size for p in self.params().values())

    def replace_head(self, name: str, out_dim: int, center: bool = True) -> None:
        """Install a freshly initialized head (used when widening to K+1)."""
        w, b = _uniform_init(self._rng, int(out_dim), self.feature_dim)
        self._heads[name] = _Head(w, b, bool(center))

    # -- forward / backward -------------------------------------------------

    def features(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x, heads=()).feats

    def forward(self, x: np.ndarray, heads: Iterable[str] | None = None) -> ForwardCache:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.in_dim:
            raise ValueError("expected inputs of width %d, got %r" % (self.in_dim, x.shape))
        acts: list[np.ndarray] = []
        a = x
        for w, b in self._psi:
            a = np.tanh(a @ w.T + b)
            acts.append(a)
        names = self.head_names if heads is None else tuple(heads)
        raw = {name: a @ self._heads[name].w.T + self._heads[name].b for name in names}
        return ForwardCache(x=x, acts=acts, raw=raw)

    def backward(
        self,
        cache: ForwardCache,
        score_grads: Mapping[str, np.ndarray],
        feat_grad: np.ndarray | None = None,
        psi_only: bool = False,
        heads_only: bool = False,
    ) -> dict[str, np.ndarray]:
        """Parameter gradients for dL/d(raw head outputs) plus optional dL/dfeats.

        ``psi_only`` treats head weights as fixed linear maps (gradients
        returned for psi parameters only); ``heads_only`` stops gradients at
        the features.
        """
        if psi_only and heads_only:
            raise ValueError("psi_only and heads_only are mutually exclusive")
        grads: dict[str, np.ndarray] = {}
        feats = cache.feats
        dfeat = np.zeros_like(feats)
        for name, g in score_grads.items():
            head = self._heads[name]
            g = np.asarray(g, dtype=np.float64)
            if g.shape != cache.raw[name].shape:
                raise ValueError("gradient shape %r mismatches head %r" % (g.shape, name))
            if not psi_only:
                grads["head:%s.w" % name] = g.T @ feats
                grads["head:%s.b" % name] = g.sum(axis=0)
            dfeat += g @ head.w
        if feat_grad is not None:
            dfeat = dfeat + feat_grad
        if heads_only:
            return grads
        for i in range(len(self._psi) - 1, -1, -1):
            a = cache.acts[i]
            prev = cache.x if i == 0 else cache.acts[i - 1]
            dz = dfeat * (1.0 - a * a)  # tanh'
            grads["psi%d.w" % i] = dz.T @ prev
            grads["psi%d.b" % i] = dz.sum(axis=0)
            dfeat = dz @ self._psi[i][0]
        return grads

    def scorer(self, name: str) -> Callable[[np.ndarray], np.ndarray]:
        """Callable batch -> centered scores, for the divergence estimators."""
        if name not in self._heads:
            raise KeyError("unknown head %r" % name)

        def score(points: np.ndarray) -> np.ndarray:
            raw = self.forward(points, heads=(name,)).raw[name]
            return center_scores(raw)

        return score

    # -- checkpointing --------------------------------------------------------

    def save(self, path) -> None:
        """JSON header line plus little-endian float64 parameter block."""
        params = self.params()
        header = {
            "format": "mcsda-mlp-v1",
            "seed": self.seed,
            "in_dim": self.in_dim,
            "hidden": list(self.hidden),
            "feature_dim": self.feature_dim,
            "heads": [
                {"name": n, "out_dim": h.w.shape[0], "center": h.center}
                for n, h in self._heads.items()
            ],
            "param_order": list(params),
        }
        with open(path, "wb") as fh:
            fh.write((json.dumps(header) + "\n").encode("utf-8"))
            for name in header["param_order"]:
                fh.write(np.ascontiguousarray(params[name], dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "MlpScorer":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode("utf-8"))
            blob = fh.read()
        if header.get("format") != "mcsda-mlp-v1":
            raise ValueError("unrecognized checkpoint header: %r" % header.get("format"))
        model = cls(
            in_dim=header["in_dim"],
            heads={h["name"]: (h["out_dim"], h["center"]) for h in header["heads"]},
            hidden=tuple(header["hidden"]),
            feature_dim=header["feature_dim"],
            seed=header["seed"],
        )
        params = model.params()
        offset = 0
        for name in header["param_order"]:
            p = params[name]
            chunk = np.frombuffer(blob, dtype="<f8", count=p.size, offset=offset)
            p[...] = chunk.reshape(p.shape)
            offset += p.size * 8
        if offset != len(blob):
            raise ValueError("checkpoint payload has %d trailing bytes" % (len(blob) - offset))
        return model


class SgdMomentum:
    """SGD with momentum over a named parameter dict.

    v <- momentum * v + g;  theta <- theta - lr * mult * v, with a fixed
    per-parameter multiplier (heads at 10x by convention).
    """

    def __init__(
        self,
        params: Mapping[str, np.ndarray],
        momentum: float = 0.9,
        lr_multipliers: Mapping[str, float] | None = None,
    ) -> None:
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1), got %r" % momentum)
        self._params = dict(params)
        self.momentum = float(momentum)
        self._mult = dict(lr_multipliers or {})
        self._vel = {name: np.zeros_like(p) for name, p in self._params.items()}

    def step(self, grads: Mapping[str, np.ndarray], lr: float) -> None:
        if lr <= 0:
            raise ValueError("learning rate must be positive, got %r" % lr)
        for name, g in grads.items():
            if name not in self._params:
                raise KeyError("gradient for unknown parameter %r" % name)
            v = self._vel[name]
            v *= self.momentum
            v += g
            self._params[name] -= lr * self._mult.get(name, 1.0) * v


def grad_reversal_step(
    model: MlpScorer,
    optimizer: SgdMomentum,
    task_grads: Mapping[str, np.ndarray],
    disagreement_grads: Mapping[str, np.ndarray],
    zeta: float,
    lr: float,
    adversary_heads: tuple[str, ...],
    zeta_on_adversary: bool = False,
) -> dict[str, np.ndarray]:
    """One simultaneous minimax update.

    Adversary head parameters descend the disagreement loss (they sharpen
    the source/target gap); the feature map receives the task gradient
    minus zeta times the disagreement gradient (the reversed signal); every
    other head sees only its task gradient.  With ``zeta_on_adversary`` the
    adversary side is scaled by zeta as well instead of staying unscaled.
    Returns the effective gradients that were applied.
    """
    adv_prefixes = tuple("head:%s." % name for name in adversary_heads)
    eff: dict[str, np.ndarray] = {}
    for name, p in model.params().items():
        t = task_grads.get(name)
        d = disagreement_grads.get(name)
        g = np.zeros_like(p)
        if t is not None:
            g = g + t
        if d is not None:
            if name.startswith(adv_prefixes):
                g = g + (zeta * d if zeta_on_adversary else d)
            elif not name.startswith("head:"):
                g = g - zeta * d
            # task heads ignore the disagreement term entirely
        eff[name] = g
    optimizer.step(eff, lr)
    return eff
