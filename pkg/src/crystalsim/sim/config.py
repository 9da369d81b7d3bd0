from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from ..node import RewardConfig

PROTOCOLS = ("crystal", "nc")
ELECTIONS = ("injected", "vrf")
STRATEGIES = ("honest", "selfish", "private")
DELAY_MODELS = ("fixed", "uniform")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines one simulation run.

    ``n_honest`` honest nodes share honest power equally; a single adversary
    holds ``alpha``. With ``election="injected"`` committees are abstract:
    honest nodes hold ``m - round(alpha*m)`` shares between them, the
    adversary ``round(alpha*m)``, and each adversary block independently
    suffers a committee failure with probability ``epsilon`` (the adversary
    then certifies it alone). ``election="vrf"`` runs real sortition and is
    only practical for small W and m.
    """

    n_honest: int = 3
    alpha: float = 0.0
    lam: float = 1 / 600
    delta: float = 0.0
    delay_model: str = "fixed"
    protocol: str = "crystal"
    election: str = "injected"
    W: int = 0
    """Bootstrap length: blocks at height <= W need no certificate."""
    m: int = 100
    k: int = 6
    qc_distance: int = 1
    epsilon: float = 0.0
    gamma_off: float = 0.0
    strategy: str = "honest"
    max_deficit: int = 3
    rewards: RewardConfig = field(default_factory=RewardConfig)
    horizon_blocks: int = 1000
    horizon_time: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        self.validate()

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha

    def validate(self):
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(f"{name}: {msg}")

        need(self.n_honest >= 1, "n_honest", "at least one honest node")
        need(0.0 <= self.alpha < 0.5, "alpha", "must lie in [0, 0.5) so that beta > 1/2")
        need(self.lam > 0, "lam", "mining rate must be positive")
        need(self.delta >= 0, "delta", "delay must be >= 0")
        need(self.delay_model in DELAY_MODELS, "delay_model", f"one of {DELAY_MODELS}")
        need(self.protocol in PROTOCOLS, "protocol", f"one of {PROTOCOLS}")
        need(self.election in ELECTIONS, "election", f"one of {ELECTIONS}")
        need(self.W >= 0, "W", "must be >= 0")
        need(self.m >= 1, "m", "must be >= 1")
        if self.election == "vrf":
            need(self.W >= self.m, "W", "vrf election needs W >= m")
        need(self.k >= 1, "k", "must be >= 1")
        need(self.qc_distance >= 1, "qc_distance", "must be >= 1")
        need(0.0 <= self.epsilon <= 1.0, "epsilon", "must lie in [0, 1]")
        need(0.0 <= self.gamma_off <= 1.0, "gamma_off", "must lie in [0, 1]")
        need(self.strategy in STRATEGIES, "strategy", f"one of {STRATEGIES}")
        need(self.max_deficit >= 1, "max_deficit", "must be >= 1")
        need(self.horizon_blocks >= 1, "horizon_blocks", "must be >= 1")
        need(self.horizon_time is None or self.horizon_time > 0, "horizon_time", "must be > 0")

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown field")
        if isinstance(d.get("rewards"), dict):
            d["rewards"] = RewardConfig(**d["rewards"])
        return cls(**d)
