"""Run configuration: a line-oriented key=value format with layer sections.

Global keys come first; per-layer regularizer blocks follow under
``[layer:NAME]`` headers. Parsing is fail-closed: unknown keys, duplicate
keys, and malformed values are positioned errors, because a silently
ignored typo in a regularizer name would invalidate an experiment.

parse -> serialize -> parse is the identity on RunConfig values.
"""

from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .regularizers import REG_KINDS, RegSpec
from .training import TrainConfig

DATASETS = ("mnist", "cifar10", "synthetic_mnist", "synthetic_cifar")
ENCODINGS = ("dense", "bitmask", "indexed", "best")


def _parse_bool(s: str) -> bool:
    if s in ("true", "false"):
        return s == "true"
    raise ValueError(f"expected true/false, got {s!r}")


def _parse_floats(s: str):
    return tuple(float(x) for x in s.split(","))


def _parse_paths(s: str):
    return tuple(x.strip() for x in s.split(",") if x.strip())


def _parse_stages(s: str):
    out = []
    for part in s.split(","):
        it, _, t = part.partition(":")
        out.append((int(it), int(t)))
    return tuple(out)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ",".join(f"{a}:{b}" for a, b in value)
        return ",".join(_fmt(v) for v in value)
    return str(value)


@dataclass
class LayerReg:
    kind: str = "none"
    lam: float = 0.0
    t: int | None = None
    period: int = 100
    biases: bool = False
    fixed_delta: bool = False
    stages: tuple = ()

    def to_spec(self) -> RegSpec:
        return RegSpec(
            kind=self.kind,
            strength=self.lam,
            t=self.t,
            period=self.period,
            apply_to_biases=self.biases,
            fixed_delta=self.fixed_delta,
            stages=self.stages,
        )


_LAYER_KEYS = {
    "kind": str,
    "lambda": float,
    "t": int,
    "period": int,
    "biases": _parse_bool,
    "fixed_delta": _parse_bool,
    "stages": _parse_stages,
}
_LAYER_ATTR = {"lambda": "lam"}


@dataclass
class RunConfig:
    dataset: str = "synthetic_cifar"
    topology: str = "cifar_quick"
    seed: int = 0
    out_dir: str = "runs/out"
    subtract_mean: bool = True

    # file-backed datasets
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    train_batches: tuple = ()
    test_batches: tuple = ()
    # procedural datasets
    synthetic_train_n: int = 2000
    synthetic_test_n: int = 500
    synthetic_noise: float = 0.8
    # optional desk-scale truncation after loading
    train_limit: int | None = None
    test_limit: int | None = None

    # trainer
    batch_size: int = 50
    learning_rate: float = 0.01
    lr_decay: float = 1.0
    lr_step: int = 1000
    momentum: float = 0.9
    max_iterations: int = 1000
    eval_interval: int = 200
    eval_max: int = 1000
    weight_decay: float = 0.0

    # command inputs
    checkpoint: str | None = None
    init_checkpoint: str | None = None
    checkpoint_encoding: str = "dense"
    target_nnz: int | None = None
    candidate_iterations: int = 2000
    retrain_iterations: int | None = None
    threshold_grid: tuple = ()
    ensemble_size: int = 1
    budget: int | None = None
    plan_log: str | None = None
    fractions: tuple = ()
    validation_fraction: float = 0.1

    layers: dict = field(default_factory=dict)

    def to_train_config(self, max_iterations=None, seed=None) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            lr_decay=self.lr_decay,
            lr_step=self.lr_step,
            momentum=self.momentum,
            max_iterations=max_iterations or self.max_iterations,
            seed=self.seed if seed is None else seed,
            eval_interval=self.eval_interval,
            eval_max=self.eval_max,
        )

    def reg_specs(self, layer_names) -> dict:
        """Per-layer RegSpec map: explicit blocks win, otherwise a global
        l2 term when weight_decay is set."""
        specs = {}
        for name in layer_names:
            if name in self.layers:
                specs[name] = self.layers[name].to_spec()
            elif self.weight_decay > 0:
                specs[name] = RegSpec(kind="l2_decay", strength=self.weight_decay)
            else:
                specs[name] = RegSpec()
        return specs


_GLOBAL_KEYS = {
    "dataset": str,
    "topology": str,
    "seed": int,
    "out_dir": str,
    "subtract_mean": _parse_bool,
    "train_images": str,
    "train_labels": str,
    "test_images": str,
    "test_labels": str,
    "train_batches": _parse_paths,
    "test_batches": _parse_paths,
    "synthetic_train_n": int,
    "synthetic_test_n": int,
    "synthetic_noise": float,
    "train_limit": int,
    "test_limit": int,
    "batch_size": int,
    "learning_rate": float,
    "lr_decay": float,
    "lr_step": int,
    "momentum": float,
    "max_iterations": int,
    "eval_interval": int,
    "eval_max": int,
    "weight_decay": float,
    "checkpoint": str,
    "init_checkpoint": str,
    "checkpoint_encoding": str,
    "target_nnz": int,
    "candidate_iterations": int,
    "retrain_iterations": int,
    "threshold_grid": _parse_floats,
    "ensemble_size": int,
    "budget": int,
    "plan_log": str,
    "fractions": _parse_floats,
    "validation_fraction": float,
}


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    section = None          # None = global scope, else layer name
    seen = {None: set()}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not (line.startswith("[layer:") and line.endswith("]")):
                raise ConfigError(f"line {lineno}: malformed section header {line!r}")
            section = line[len("[layer:") : -1]
            if not section:
                raise ConfigError(f"line {lineno}: empty layer name")
            if section in cfg.layers:
                raise ConfigError(f"line {lineno}: duplicate layer section {section!r}")
            cfg.layers[section] = LayerReg()
            seen[section] = set()
            continue
        key, eq, value = (part.strip() for part in line.partition("="))
        if not eq:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        if key in seen[section]:
            where = f"layer {section!r}" if section else "global scope"
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in {where}")
        seen[section].add(key)

        table = _GLOBAL_KEYS if section is None else _LAYER_KEYS
        if key not in table:
            where = f"layer section {section!r}" if section else "global scope"
            raise ConfigError(f"line {lineno}: unknown key {key!r} in {where}")
        try:
            parsed = table[key](value)
        except ValueError as e:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {e}") from e
        if section is None:
            setattr(cfg, key, parsed)
        else:
            setattr(cfg.layers[section], _LAYER_ATTR.get(key, key), parsed)

    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.dataset not in DATASETS:
        raise ConfigError(f"unknown dataset {cfg.dataset!r}; known: {DATASETS}")
    if cfg.checkpoint_encoding not in ENCODINGS:
        raise ConfigError(
            f"unknown checkpoint_encoding {cfg.checkpoint_encoding!r}; known: {ENCODINGS}"
        )
    if not 0.0 < cfg.validation_fraction < 1.0:
        raise ConfigError("validation_fraction must be in (0, 1)")
    for name, layer in cfg.layers.items():
        if layer.kind not in REG_KINDS:
            raise ConfigError(f"layer {name!r}: unknown kind {layer.kind!r}")
        try:
            layer.to_spec()
        except ValueError as e:
            raise ConfigError(f"layer {name!r}: {e}") from e
        if layer.stages and [it for it, _ in layer.stages] != sorted(
            {it for it, _ in layer.stages}
        ):
            raise ConfigError(f"layer {name!r}: stage iterations must be strictly increasing")
    try:
        cfg.to_train_config()
    except ValueError as e:
        raise ConfigError(str(e)) from e


def validate_layer_names(cfg: RunConfig, known_names) -> None:
    """Every [layer:NAME] block must target a layer of the chosen topology."""
    unknown = sorted(set(cfg.layers) - set(known_names))
    if unknown:
        raise ConfigError(
            f"config names layers {unknown} not present in topology "
            f"{cfg.topology!r} (has {sorted(known_names)})"
        )


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        if f.name == "layers":
            continue
        value = getattr(cfg, f.name)
        if value is None or value == ():
            continue
        lines.append(f"{f.name} = {_fmt(value)}")
    for name, layer in cfg.layers.items():
        lines.append("")
        lines.append(f"[layer:{name}]")
        for lf in fields(LayerReg):
            value = getattr(layer, lf.name)
            if value is None or value == ():
                continue
            key = "lambda" if lf.name == "lam" else lf.name
            lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"
