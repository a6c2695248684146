"""Run configuration: a dataclass, a key = value file format and overrides."""
import math
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError

ALIASES = {"circ": "circumference", "p": "degrees", "a": "a_values", "out": "output",
           "res": "resolution", "resolutions": "resolutions"}


@dataclass(frozen=True)
class RunConfig:
    model: str = "flat_cylinder"
    params: dict = field(default_factory=dict)
    mesh: str = None
    resolution: int = 16
    degrees: tuple = (0,)
    a_values: tuple = (1.0, 2.0, 3.0)
    thickness: float = None
    method: str = "auto"
    tol_slope: float = 1e-3
    audit_tol: float = 1e-3
    bound_tol: float = 1e-9
    mu1: float = None
    resolutions: tuple = (16, 32, 64)
    output: str = "out"
    oracle: bool = True
    seed: int = 0

    def __post_init__(self):
        a = self.a_values
        if len(a) == 0 or any(not math.isfinite(x) or x < 0 for x in a):
            raise ConfigError("cylinder lengths must be finite and >= 0")
        if any(y <= x for x, y in zip(a, a[1:])):
            raise ConfigError("cylinder schedule must be strictly increasing")
        for name in ("tol_slope", "audit_tol", "bound_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.thickness is not None and not self.thickness > 0:
            raise ConfigError("layer thickness must be positive")
        if self.mu1 is not None and not self.mu1 > 0:
            raise ConfigError("mu1 must be positive")
        if self.method not in ("auto", "projection", "solve"):
            raise ConfigError(f"unknown method {self.method!r}")
        if any(p < 0 for p in self.degrees):
            raise ConfigError("degrees must be >= 0")
        if self.resolution < 4 or any(r < 4 for r in self.resolutions):
            raise ConfigError("resolution must be at least 4")

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "params":
                for k in sorted(v):
                    lines.append(f"param.{k} = {_fmt(v[k])}")
            elif v is not None:
                lines.append(f"{f.name} = {_fmt(v)}")
        return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        if v and isinstance(v[0], (tuple, list)):
            return ",".join(":".join(_fmt(y) for y in x) for x in v)
        return ",".join(_fmt(x) for x in v)
    return str(v)


def _number(s):
    try:
        return int(s)
    except ValueError:
        return float(s)


def _param_value(s):
    s = s.strip()
    if ":" in s:
        # segment lists: l:w,l:w
        return tuple(tuple(float(x) for x in seg.split(":")) for seg in s.split(","))
    if "," in s:
        return tuple(_number(x) for x in s.split(","))
    try:
        return _number(s)
    except ValueError:
        return s


def _convert(name, raw):
    if name in ("degrees", "resolutions"):
        return tuple(int(x) for x in str(raw).split(",") if x.strip())
    if name == "a_values":
        return tuple(float(x) for x in str(raw).split(",") if x.strip())
    if name in ("resolution", "seed"):
        return int(raw)
    if name in ("thickness", "tol_slope", "audit_tol", "bound_tol", "mu1"):
        return float(raw)
    if name == "oracle":
        s = str(raw).lower()
        if s not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"oracle must be a boolean, got {raw!r}")
        return s in ("true", "1", "yes")
    return str(raw)


def apply(cfg, pairs):
    """New config with (key, raw string) overrides.  Unknown keys are model
    parameters."""
    names = {f.name for f in fields(RunConfig)}
    upd = {}
    params = dict(cfg.params)
    for key, raw in pairs:
        key = key.strip().replace("-", "_")
        if key.startswith("param."):
            params[key[6:]] = _param_value(raw)
            continue
        key = ALIASES.get(key, key)
        if key in names and key != "params":
            try:
                upd[key] = _convert(key, raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
        else:
            params[key] = _param_value(raw)
    return replace(cfg, params=params, **upd)


def parse_text(text):
    pairs = []
    for i, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {i}: expected key = value")
        k, v = line.split("=", 1)
        pairs.append((k.strip(), v.strip()))
    return pairs


def load(path=None, overrides=()):
    cfg = RunConfig()
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        cfg = apply(cfg, parse_text(text))
    return apply(cfg, overrides)
