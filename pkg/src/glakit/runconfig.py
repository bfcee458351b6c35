"""Flat key=value run configuration shared by the CLI subcommands."""

from __future__ import annotations

from dataclasses import dataclass, fields

__all__ = ["RunConfig", "parse_config", "format_config"]

_FORMS = ("recurrent", "parallel", "chunkwise")


@dataclass
class RunConfig:
    kind: str = "general"
    gamma: float = 0.9
    L: int = 32
    dk: int = 4
    dv: int = 4
    seed: int = 1
    gate_floor: float = 0.5
    chunk: int = 8
    policy: str = "materialize"
    form: str = "chunkwise"
    tol: float = 1e-9
    grad_tol: float = 1e-6
    eps: float = 1e-5

    def validate(self) -> "RunConfig":
        if self.form not in _FORMS:
            raise ValueError(f"form must be one of {_FORMS}, got {self.form!r}")
        if self.L < 1 or self.dk < 1 or self.dv < 1 or self.chunk < 1:
            raise ValueError("L, dk, dv, chunk must all be >= 1")
        if not (0.0 < self.gate_floor <= 1.0):
            raise ValueError("gate_floor must be in (0, 1]")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        return self


def format_config(cfg: RunConfig) -> str:
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    types = {f.name: f.type for f in fields(cfg)}
    casts = {"str": str, "int": int, "float": float}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in types:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        setattr(cfg, key, casts[types[key]](value))
    return cfg.validate()
