"""Run configuration files: a JSON object with optional ``macro`` and ``proxy`` sections.

Example::

    {"macro": {"stem_channels": 16, "stages": [[5, 16], [5, 32], [5, 64]]},
     "proxy": {"batch_size": 16, "seed": 0}}
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .archspace import MacroConfig
from .proxies import ProxyConfig

CONFIG_ENV = "ZSNAS_CONFIG"


@dataclass(frozen=True)
class RunConfig:
    macro: MacroConfig = field(default_factory=MacroConfig)
    proxy: ProxyConfig = field(default_factory=ProxyConfig)

    def to_dict(self) -> dict:
        return {"macro": self.macro.to_dict(), "proxy": self.proxy.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        if not isinstance(d, dict):
            raise ValueError("config must be a JSON object")
        unknown = set(d) - {"macro", "proxy"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        return cls(MacroConfig.from_dict(d.get("macro", {})), ProxyConfig.from_dict(d.get("proxy", {})))


def load_config(path=None) -> RunConfig:
    """Read ``path``, else the file named by $ZSNAS_CONFIG, else defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return RunConfig.from_dict(data)
