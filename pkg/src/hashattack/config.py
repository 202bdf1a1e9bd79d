"""INI experiment configuration: one section per pipeline stage, unknown keys rejected."""

import configparser
import dataclasses
from dataclasses import dataclass, field

from .align_net import AlignConfig
from .attack import AttackConfig
from .backend import BackendConfig
from .data import ConfigError, DatasetConfig
from .text import TEXT_DIM


@dataclass
class HashModelConfig:
    k: int = 16
    epochs: int = 20
    lr: float = 3e-3
    batch_size: int = 32
    quant_weight: float = 0.1
    width: int = 16
    augment: bool = True
    seed: int = 0


@dataclass
class EvalConfig:
    K: int = 50
    pairing_seed: int = None  # None: reuse the dataset seed
    n_captions: int = 5
    caption_threshold: float = 0.25
    projection_ridge: float = 10.0
    chance_trials: int = 200
    ablation_seeds: tuple = (0, 1, 2)


@dataclass
class TextConfig:
    provider: str = "mock"  # mock | http
    seed: int = None  # mock caption seed; None: reuse the dataset seed
    endpoint: str = ""
    model: str = ""
    timeout: float = 30.0
    retries: int = 3
    token_env: str = "CAPTION_API_TOKEN"


SECTIONS = {
    "dataset": DatasetConfig,
    "hash_model": HashModelConfig,
    "alignment": AlignConfig,
    "backend": BackendConfig,
    "attack": AttackConfig,
    "evaluation": EvalConfig,
    "text": TextConfig,
}


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    hash_model: HashModelConfig = field(default_factory=HashModelConfig)
    alignment: AlignConfig = field(default_factory=AlignConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    text: TextConfig = field(default_factory=TextConfig)
    source_text: str = None  # raw file contents, echoed verbatim into reports

    def __post_init__(self):
        self.validate()

    def validate(self):
        d, b, a, e = self.dataset, self.backend, self.attack, self.evaluation
        if d.num_classes < 2:
            raise ConfigError("dataset.num_classes must be at least 2")
        if b.image_size != d.image_size:
            raise ConfigError(f"backend.image_size {b.image_size} != dataset.image_size {d.image_size}")
        if b.image_channels != 3:
            raise ConfigError("backend.image_channels must be 3 for the shapes dataset")
        if b.text_dim != TEXT_DIM:
            raise ConfigError(f"backend.text_dim must be {TEXT_DIM}")
        if a.steps > b.timesteps:
            raise ConfigError(f"attack.steps {a.steps} exceeds backend.timesteps {b.timesteps}")
        if self.hash_model.k < 2:
            raise ConfigError("hash_model.k must be at least 2")
        if e.K < 1:
            raise ConfigError("evaluation.K must be positive")
        if not e.ablation_seeds:
            raise ConfigError("evaluation.ablation_seeds must list at least one seed")
        if self.text.provider not in ("mock", "http"):
            raise ConfigError(f"unknown text.provider {self.text.provider!r}")
        if self.text.provider == "http" and not self.text.endpoint:
            raise ConfigError("text.endpoint is required for the http provider")

    @property
    def pairing_seed(self):
        e = self.evaluation.pairing_seed
        return self.dataset.seed if e is None else e

    @property
    def caption_seed(self):
        return self.dataset.seed if self.text.seed is None else self.text.seed

    def with_seed(self, seed):
        """Copy with every stage seed set to ``seed`` (used for multi-seed sweeps)."""
        parts = {}
        for name in SECTIONS:
            sec = getattr(self, name)
            if "seed" in {f.name for f in dataclasses.fields(sec)}:
                sec = dataclasses.replace(sec, seed=seed)
            parts[name] = sec
        parts["evaluation"] = dataclasses.replace(parts["evaluation"], pairing_seed=None)
        return ExperimentConfig(**parts, source_text=self.source_text)


def _parse_value(raw, default, name):
    s = raw.strip()
    if s.lower() == "none":
        return None
    kind = type(default)
    try:
        if isinstance(default, bool):
            if s.lower() in ("true", "yes", "on", "1"):
                return True
            if s.lower() in ("false", "no", "off", "0"):
                return False
            raise ValueError(s)
        if isinstance(default, tuple):
            items = [v.strip() for v in s.split(",") if v.strip()]
            elem = type(default[0]) if default else float
            return tuple(elem(v) for v in items)
        if default is None:
            # optional numeric fields ("margin", "noise_std", "pixel_eps", seeds)
            return int(s) if name.endswith("seed") else float(s)
        if kind is int:
            return int(s)
        if kind is float:
            return float(s)
        return s
    except ValueError:
        raise ConfigError(f"cannot parse {name} = {raw!r}") from None


def parse_config(text):
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str  # keys are case-sensitive ("K")
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    unknown = set(cp.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    parts = {}
    for name, cls in SECTIONS.items():
        defaults = {f.name: getattr(cls(), f.name) for f in dataclasses.fields(cls)}
        values = {}
        if cp.has_section(name):
            for key, raw in cp.items(name):
                if key not in defaults:
                    raise ConfigError(f"unknown key {key!r} in section [{name}]")
                values[key] = _parse_value(raw, defaults[key], f"{name}.{key}")
        try:
            parts[name] = cls(**values)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"[{name}]: {e}") from None
    return ExperimentConfig(**parts, source_text=text)


def load_config(path):
    with open(path, newline="") as f:
        return parse_config(f.read())


def _format(v):
    if isinstance(v, tuple):
        return ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return "none" if v is None else str(v)


def dump_config(cfg):
    """Canonical INI text for ``cfg`` (every key written out)."""
    lines = []
    for name in SECTIONS:
        lines.append(f"[{name}]")
        sec = getattr(cfg, name)
        for f in dataclasses.fields(sec):
            lines.append(f"{f.name} = {_format(getattr(sec, f.name))}")
        lines.append("")
    return "\n".join(lines)


def default_config_text():
    return dump_config(ExperimentConfig())
