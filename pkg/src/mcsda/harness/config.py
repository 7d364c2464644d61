"""Run configuration and the per-epoch metrics schema."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from ..neural import Schedules

__all__ = ["METHODS", "SURROGATES", "ExperimentConfig", "MetricsRecord"]

METHODS = (
    "source_only",
    "mcdal_l1",
    "mcdal_kl",
    "mcdal_ce",
    "mcdal_mdd_variant",
    "mcdal_dann",
    "symmnets_v2",
    "symmnets_v2_no_Lt",
    "symmnets_v2_no_adv",
)

SURROGATES = ("l1", "kl", "ce", "mdd_variant", "dann")

_EVAL_HEADS = ("auto", "f", "fs", "ft")


@dataclass
class ExperimentConfig:
    """Everything one training run needs; JSON round-trippable.

    ``seed`` drives model initialization and batch shuffling; the dataset
    carries its own seed.  ``zeta`` and ``xi`` follow the annealed
    adversarial weight when left at None (the default coupling), or stay at
    a fixed float when set.  ``eval_head`` 'auto' resolves to the task head
    for the minimax trainers and to the target-path head for the symmetric
    trainer (source-path head for the no-target-task ablation).
    """

    method: str = "source_only"
    rho: float = 1.0
    epochs: int = 60
    batch_size: int = 64
    full_batch_limit: int = 512
    seed: int = 0
    hidden: tuple[int, ...] = (32, 32)
    feature_dim: int = 16
    schedules: Schedules = field(default_factory=Schedules)
    zeta: float | None = None  # None: follow the annealed lambda
    xi: float | None = None  # None: follow the annealed lambda (partial mode)
    nu: float = 6.0  # super-class oversampling factor (open-set mode)
    zeta_on_adversary: bool = False
    aux_task_weight: float = 1.0
    eval_head: str = "auto"
    outdir: str | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError("method must be one of %r, got %r" % (METHODS, self.method))
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.epochs < 1 or self.batch_size < 1 or self.full_batch_limit < 1:
            raise ValueError("epochs, batch_size and full_batch_limit must be positive")
        if self.eval_head not in _EVAL_HEADS:
            raise ValueError("eval_head must be one of %r" % (_EVAL_HEADS,))
        for name, v in (("zeta", self.zeta), ("xi", self.xi)):
            if v is not None and not 0.0 <= float(v) <= 1.0:
                raise ValueError("%s must lie in [0, 1] when fixed, got %r" % (name, v))
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if isinstance(self.hidden, list):
            self.hidden = tuple(self.hidden)
        if isinstance(self.schedules, dict):
            self.schedules = Schedules(**self.schedules)

    @property
    def surrogate(self) -> str | None:
        """The surrogate implied by a minimax method name, else None."""
        if self.method.startswith("mcdal_"):
            return self.method[len("mcdal_") :]
        return None

    def resolve_eval_head(self) -> str:
        if self.eval_head != "auto":
            return self.eval_head
        if self.method == "symmnets_v2_no_Lt":
            return "fs"
        if self.method.startswith("symmnets"):
            return "ft"
        return "f"

    def to_json(self) -> dict:
        out = dataclasses.asdict(self)
        out["hidden"] = list(self.hidden)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        return cls(**data)

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


@dataclass
class MetricsRecord:
    """One epoch of training metrics; constant schema within a run.

    Fields that do not apply to a method stay None so every line of the
    JSONL stream parses independently against the same schema.
    """

    epoch: int
    method: str
    seed: int
    lr: float
    lambda_p: float
    zeta: float | None
    xi: float | None
    losses: dict[str, float]
    source_acc: float
    target_acc: float
    divergence_proxy: float | None
    clamp_events: int
    omega: list[float] | None = None
    os_all: float | None = None
    os_shared: float | None = None
    unknown_acc: float | None = None
    nan_flag: bool = False

    def to_json_line(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)
