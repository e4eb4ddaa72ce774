"""Run configuration: a flat ``key = value`` file plus command-line overrides."""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

from mifno.errors import ConfigError
from mifno.mp2_fno import FnoPolicy

SOLVERS = ("fci", "vqe_uccsd", "both")
SCOPES = ("per_increment", "global")
VQE_BACKENDS = ("subspace", "statevector")


@dataclass(frozen=True)
class RunConfig:
    fcidump_path: str
    order: int = 2
    fno_occupancy: Optional[float] = None
    fno_keep: Optional[int] = None
    fno_scope: str = "per_increment"
    solver: str = "fci"
    screen_threshold: Optional[float] = None
    workers: int = 1
    ledger_path: Optional[str] = None
    report_path: Optional[str] = None
    frozen_core: int = 0
    vqe_backend: str = "subspace"
    resume: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.fcidump_path:
            raise ConfigError("fcidump_path is required")
        if self.order < 1:
            raise ConfigError("order must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.fno_occupancy is not None and self.fno_keep is not None:
            raise ConfigError("set at most one of fno_occupancy and fno_keep")
        if self.fno_occupancy is not None and not 0.0 < self.fno_occupancy <= 1.0:
            raise ConfigError("fno_occupancy must lie in (0, 1]")
        if self.fno_keep is not None and self.fno_keep < 1:
            raise ConfigError("fno_keep must be at least 1")
        if self.fno_scope not in SCOPES:
            raise ConfigError(f"fno_scope must be one of {SCOPES}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}")
        if self.vqe_backend not in VQE_BACKENDS:
            raise ConfigError(f"vqe_backend must be one of {VQE_BACKENDS}")
        if self.screen_threshold is not None and self.screen_threshold < 0:
            raise ConfigError("screen_threshold must be non-negative")
        if self.frozen_core < 0:
            raise ConfigError("frozen_core must be non-negative")
        if self.resume and not self.ledger_path:
            raise ConfigError("resume needs a ledger_path")

    @property
    def fno_policy(self) -> FnoPolicy:
        return FnoPolicy(occupancy=self.fno_occupancy, keep_count=self.fno_keep)

    @property
    def solvers(self) -> tuple:
        return ("fci", "vqe_uccsd") if self.solver == "both" else (self.solver,)

    @property
    def policy_tag(self) -> str:
        tag = self.fno_policy.tag
        return tag if tag == "none" else f"{tag};{self.fno_scope}"

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        # one FNO selector on the command line replaces the other from the file
        if "fno_occupancy" in kw:
            kw.setdefault("fno_keep", None)
        if "fno_keep" in kw:
            kw.setdefault("fno_occupancy", None)
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


def _convert(name: str, raw: str, typ):
    raw = raw.strip()
    if raw.lower() in ("", "none", "null"):
        return None
    try:
        if typ is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


_TYPES = {
    "fcidump_path": str, "order": int, "fno_occupancy": float, "fno_keep": int,
    "fno_scope": str, "solver": str, "screen_threshold": float, "workers": int,
    "ledger_path": str, "report_path": str, "frozen_core": int, "vqe_backend": str,
    "resume": bool,
}


_ALIASES = {"fno.occupancy": "fno_occupancy", "fno.keep_count": "fno_keep", "fno.scope": "fno_scope",
            "fcidump": "fcidump_path", "ledger": "ledger_path", "report": "report_path"}


def parse_config(text: str, base_dir: Path | None = None) -> dict:
    """Parse flat ``key = value`` lines (``#`` comments) into typed fields."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None
    if cp.sections() != ["run"]:
        raise ConfigError("config files are flat; section headers are not allowed")
    out = {}
    for key, raw in cp["run"].items():
        key = key.strip()
        key = _ALIASES.get(key, key.replace("-", "_"))
        if key not in _TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        value = _convert(key, raw, _TYPES[key])
        if key.endswith("_path") and value is not None and base_dir is not None:
            p = Path(value)
            value = str(p if p.is_absolute() else base_dir / p)
        out[key] = value
    return out


def load_config(path, **overrides) -> RunConfig:
    path = Path(path)
    values = parse_config(path.read_text(), base_dir=path.parent)
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "fno_occupancy" in overrides and overrides["fno_occupancy"] is not None:
        values.pop("fno_keep", None)
    if "fno_keep" in overrides and overrides["fno_keep"] is not None:
        values.pop("fno_occupancy", None)
    if "fcidump_path" not in values:
        raise ConfigError("fcidump_path is required")
    names = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in values.items() if k in names})
