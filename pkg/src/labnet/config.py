"""Run configuration: defaults, config-file parsing and validation."""
import configparser
import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, fields

from .errors import InvalidArgument

MODELS = ("lenet5", "resnet-8", "resnet-14", "resnet-20", "resnet-32", "resnet-50", "rbf-classic")
DATASETS = ("mnist", "cifar10", "cifar100")

# per (model family, dataset) defaults: lr, epochs, weight decay, lambda_sum, sharing
RECIPES = {
    ("lenet5", "mnist"): (1e-3, 30, 1e-4, 1e-2, "layer"),
    ("resnet", "cifar10"): (1e-3, 200, 1e-4, 1e-2, "channel"),
    ("resnet", "cifar100"): (3e-3, 200, 3e-4, 1.0, "global"),
}

RESNET_EPOCHS = {"resnet-8": 150, "resnet-14": 175, "resnet-20": 200, "resnet-32": 235, "resnet-50": 280}


class ConfigError(InvalidArgument):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class TrainConfig:
    model: str = "lenet5"
    dataset: str = "mnist"
    activation: str = "lab"
    kernel: str = "spline"
    degree: int = 3
    s: int = 3
    init: str = "hockey-stick"
    sharing: str | None = None
    r: float = 2.0
    lambda_sum: float | None = None
    lr: float | None = None
    schedule: str | None = None
    epochs: int | None = None
    weight_decay: float | None = None
    batch: int = 128
    seed: int = 0
    clip: float = 15.0
    flip: bool | None = None
    augment: bool = True
    train_subset: int = 0
    hidden: int = 250

    def family(self):
        return "resnet" if self.model.startswith("resnet") else self.model

    def resolved(self):
        """Copy with every unset field filled from the recipe for this model and dataset."""
        self.validate()
        recipe = RECIPES.get((self.family(), self.dataset)) or RECIPES[("lenet5", "mnist")]
        if self.family() == "resnet" and (self.family(), self.dataset) not in RECIPES:
            recipe = RECIPES[("resnet", "cifar10")]
        lr, epochs, wd, lam, sharing = recipe
        if self.family() == "resnet":
            epochs = RESNET_EPOCHS[self.model]
        c = dataclasses.replace(self)
        c.lr = lr if c.lr is None else c.lr
        c.epochs = epochs if c.epochs is None else c.epochs
        c.weight_decay = wd if c.weight_decay is None else c.weight_decay
        c.lambda_sum = lam if c.lambda_sum is None else c.lambda_sum
        c.sharing = sharing if c.sharing is None else c.sharing
        if c.flip is None:
            c.flip = c.dataset != "mnist"
        if c.schedule is None:
            c.schedule = default_schedule(c)
        c.validate()
        return c

    def validate(self):
        def need(cond, field, msg):
            if not cond:
                raise ConfigError(field, msg)

        need(self.model in MODELS, "model", f"must be one of {MODELS}, got {self.model!r}")
        need(self.dataset in DATASETS, "dataset", f"must be one of {DATASETS}, got {self.dataset!r}")
        need(self.activation in ("relu", "lab"), "activation", f"must be relu or lab, got {self.activation!r}")
        need(self.kernel in ("gaussian", "multiquadric", "spline"), "kernel", f"unknown kernel {self.kernel!r}")
        need(self.degree >= 1, "degree", "must be >= 1")
        need(self.s >= 2, "s", "must be >= 2")
        need(self.init in ("linear", "random-y", "hockey-stick"), "init", f"unknown strategy {self.init!r}")
        need(self.sharing in (None, "channel", "layer", "global"), "sharing", f"unknown sharing {self.sharing!r}")
        need(self.r > 0, "r", "must be positive")
        need(self.clip > 0, "clip", "must be positive")
        need(self.batch >= 1, "batch", "must be >= 1")
        need(self.epochs is None or self.epochs >= 0, "epochs", "must be >= 0")
        need(self.lr is None or self.lr > 0, "lr", "must be positive")
        need(self.lambda_sum is None or self.lambda_sum >= 0, "lambda_sum", "must be >= 0")
        need(self.weight_decay is None or self.weight_decay >= 0, "weight_decay", "must be >= 0")
        need(self.train_subset >= 0, "train_subset", "must be >= 0")
        need(self.hidden >= 1, "hidden", "must be >= 1")
        if self.schedule:
            from .nn.optim import StepSchedule
            try:
                StepSchedule.parse(1.0, self.schedule)
            except ValueError:
                raise ConfigError("schedule", f"expected 'epoch:rate;...', got {self.schedule!r}") from None

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        return hashlib.sha1(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:8]


def default_schedule(c):
    from .nn.optim import StepSchedule, lenet_schedule, resnet_schedule
    if c.family() == "resnet":
        return resnet_schedule(c.lr, RESNET_EPOCHS[c.model]).describe()
    if c.family() == "lenet5":
        return lenet_schedule(c.lr, 30).describe()
    return StepSchedule(c.lr).describe()


_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def _base_type(t):
    args = [a for a in typing.get_args(t) if a is not type(None)]
    return args[0] if args else t


def coerce(field, value):
    """Convert a string value to the type of ``field``."""
    if field not in _TYPES:
        raise ConfigError(field, "unknown configuration key")
    if not isinstance(value, str):
        return value
    t = _base_type(_TYPES[field])
    optional = type(None) in typing.get_args(_TYPES[field])
    v = value.strip()
    if optional and v.lower() in ("none", ""):
        return None
    if t is bool:
        if v.lower() in ("1", "true", "yes", "on"):
            return True
        if v.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(field, f"cannot parse {value!r} as a boolean")
    try:
        return t(v)
    except ValueError:
        raise ConfigError(field, f"cannot parse {value!r}") from None


def parse_config_text(text):
    """Parse flat ``key = value`` lines (``#`` comments allowed) into a dict of typed values."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None
    return {k.replace("-", "_"): coerce(k.replace("-", "_"), v) for k, v in cp["config"].items()}


def load_config(path=None, overrides=None):
    values = {}
    if path:
        with open(path) as fh:
            values.update(parse_config_text(fh.read()))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = coerce(k, v)
    try:
        return TrainConfig(**values)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None
