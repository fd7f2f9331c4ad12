"""Engine configuration: one flat JSON document covering every stage.

Unknown keys are rejected so typos surface immediately. Radii left null are
derived from the step (min(4*step, 100) locally, min(6*step, 150) globally).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .errors import ConfigError
from .solver import SolverConfig


@dataclass
class EngineConfig:
    patch: int = 256
    step: int = 16
    k: int = 1
    beta: float = 1.0
    iter_cap: int | None = None
    l_th_init: float = 0.0
    rho: float = 0.0
    s_lo: float = 10.0 / 14.0
    s_hi: float = 14.0 / 10.0
    r_l: float | None = None
    r_g: float | None = None
    iter_f_l: int = 200
    iter_f_g: int = 20000
    seed: int = 0
    descriptor: str = "baseline"
    mee_stride: int = 4

    @property
    def resolved_r_l(self) -> float:
        return self.r_l if self.r_l is not None else float(min(4 * self.step, 100))

    @property
    def resolved_r_g(self) -> float:
        return self.r_g if self.r_g is not None else float(min(6 * self.step, 150))

    def iterations(self, sar_dims, opt_dims) -> int:
        """beta * (ref area + src area) / 2, clamped by the optional cap."""
        w_s, h_s = sar_dims
        w_o, h_o = opt_dims
        raw = int(round(self.beta * (w_o * h_o + w_s * h_s) / 2.0))
        if self.iter_cap is not None:
            raw = min(raw, self.iter_cap)
        return max(1, raw)

    def solver_config(self, sar_dims, opt_dims) -> SolverConfig:
        return SolverConfig(
            iterations=self.iterations(sar_dims, opt_dims),
            beta=self.beta,
            s_lo=self.s_lo,
            s_hi=self.s_hi,
            l_th_init=self.l_th_init,
            rho=self.rho,
            r_l=self.resolved_r_l,
            r_g=self.resolved_r_g,
            iter_f_l=self.iter_f_l,
            iter_f_g=self.iter_f_g,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**data)

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_file(cls, path) -> "EngineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(data)
