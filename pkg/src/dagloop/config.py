from __future__ import annotations

from dataclasses import asdict, dataclass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparameters:
    treatment: str
    outcome: str
    k_init_min: int = 5
    k_init_max: int = 15
    k_refine: int = 5
    t_max: int = 10
    m: int | None = None  # columns to sample; None keeps them all
    alpha: float = 0.05
    theta_global: float = 0.60
    theta_r2: float = 0.05
    theta_vif: float = 10.0
    accept_negligible_effect: bool = False

    def validate(self) -> "Hyperparameters":
        if not 1 <= self.k_init_min <= self.k_init_max:
            raise ConfigError(f"need 1 <= k_init_min <= k_init_max, got {self.k_init_min}, {self.k_init_max}")
        if self.m is not None and (self.m < 2 or self.k_init_max > self.m):
            raise ConfigError(f"need 2 <= M and k_init_max <= M, got M={self.m}")
        if self.t_max < 1:
            raise ConfigError(f"T_max must be at least 1, got {self.t_max}")
        if self.k_refine < 0:
            raise ConfigError("k_refine must be non-negative")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        for name in ("theta_global", "theta_r2", "theta_vif"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.treatment == self.outcome:
            raise ConfigError("treatment and outcome must differ")
        return self

    def to_dict(self) -> dict:
        return asdict(self)
