"""Experiment configuration: dataclasses, INI files, and flag merging.

The file format is flat key=value pairs under sections, mirrored one-to-one
by CLI flags; flags win over file values.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

from .training import TrainConfig
from .unlearning import DESTROYER_NEGATIVE, DESTROYER_RANDOM, UnlearnConfig

METHOD_DISTILL = "distill"
METHOD_GRADASCENT = "gradascent"

DESTROYER_AUTO = "auto"
_DESTROYER_FLAG = {"random": DESTROYER_RANDOM, "negative": DESTROYER_NEGATIVE}


@dataclass(frozen=True)
class SbmSpec:
    blocks: int = 8
    per_block: int = 25
    p_in: float = 0.2
    p_out: float = 0.005
    feature_dim: int = 8


@dataclass(frozen=True)
class FileSpec:
    edges: str = ""
    features: str | None = None
    feature_dim: int = 32


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    dataset_kind: str = "sbm"
    sbm: SbmSpec = field(default_factory=SbmSpec)
    files: FileSpec = field(default_factory=FileSpec)
    arch: str = "gcn"
    hidden: tuple = (128, 64)
    val_frac: float = 0.05
    test_frac: float = 0.05
    forget_ratio: float = 0.025
    locality: str = "in"
    nodes: tuple = ()
    method: str = METHOD_DISTILL
    destroyer: str = DESTROYER_AUTO
    train: TrainConfig = field(default_factory=TrainConfig)
    unlearn: UnlearnConfig = field(default_factory=UnlearnConfig)
    out_dir: str = "runs"

    def __post_init__(self):
        if self.dataset_kind not in ("sbm", "files"):
            raise ValueError(f"dataset kind must be 'sbm' or 'files', got {self.dataset_kind!r}")
        if self.dataset_kind == "files" and not self.files.edges:
            raise ValueError("files dataset needs an edge list path")
        if self.method not in (METHOD_DISTILL, METHOD_GRADASCENT):
            raise ValueError(f"unknown method {self.method!r}")
        if self.locality not in ("in", "out", "node"):
            raise ValueError(f"unknown locality {self.locality!r}")
        if self.locality == "node" and not self.nodes:
            raise ValueError("node locality needs --nodes")

    @property
    def dataset_name(self) -> str:
        if self.dataset_kind == "sbm":
            return "sbm"
        stem = self.files.edges.rsplit("/", 1)[-1]
        return stem.rsplit(".", 1)[0]

    def destroyer_kind(self) -> str:
        """Resolve the destroyer, rejecting strategy/destroyer mismatches."""
        required = DESTROYER_NEGATIVE if self.unlearn.strategy == 3 else DESTROYER_RANDOM
        if self.destroyer == DESTROYER_AUTO:
            return required
        chosen = _DESTROYER_FLAG.get(self.destroyer, self.destroyer)
        if chosen != required:
            raise ValueError(
                f"strategy {self.unlearn.strategy} requires destroyer "
                f"{required!r}, got {chosen!r}"
            )
        return chosen


def _parse_hidden(text: str) -> tuple:
    dims = tuple(int(x) for x in text.replace(" ", "").split(",") if x)
    if not dims:
        raise ValueError("hidden dims must be a comma list of ints")
    return dims


def _parse_nodes(text: str) -> tuple:
    return tuple(int(x) for x in text.replace(" ", "").split(",") if x)


def load_config_file(path) -> ExperimentConfig:
    """Read an INI experiment file into an ExperimentConfig."""
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="ascii") as fh:
        parser.read_file(fh)
    cfg = ExperimentConfig()
    exp = parser["experiment"] if parser.has_section("experiment") else {}
    ds = parser["dataset"] if parser.has_section("dataset") else {}
    split = parser["split"] if parser.has_section("split") else {}
    forget = parser["forget"] if parser.has_section("forget") else {}
    train = parser["train"] if parser.has_section("train") else {}
    unlearn = parser["unlearn"] if parser.has_section("unlearn") else {}
    output = parser["output"] if parser.has_section("output") else {}

    kind = ds.get("kind", cfg.dataset_kind)
    sbm = SbmSpec(
        blocks=int(ds.get("blocks", cfg.sbm.blocks)),
        per_block=int(ds.get("per_block", cfg.sbm.per_block)),
        p_in=float(ds.get("p_in", cfg.sbm.p_in)),
        p_out=float(ds.get("p_out", cfg.sbm.p_out)),
        feature_dim=int(ds.get("feature_dim", cfg.sbm.feature_dim)),
    )
    files = FileSpec(
        edges=ds.get("edges", cfg.files.edges),
        features=ds.get("features", None) or None,
        feature_dim=int(ds.get("feature_dim", cfg.files.feature_dim)),
    )
    retain_batch = unlearn.get("retain_batch", "auto")
    return ExperimentConfig(
        seed=int(exp.get("seed", cfg.seed)),
        dataset_kind=kind,
        sbm=sbm,
        files=files,
        arch=exp.get("arch", cfg.arch),
        hidden=_parse_hidden(exp.get("hidden", "128,64")),
        val_frac=float(split.get("val_frac", cfg.val_frac)),
        test_frac=float(split.get("test_frac", cfg.test_frac)),
        forget_ratio=float(forget.get("ratio", cfg.forget_ratio)),
        locality=forget.get("locality", cfg.locality),
        nodes=_parse_nodes(forget.get("nodes", "")),
        method=exp.get("method", cfg.method),
        destroyer=unlearn.get("destroyer", cfg.destroyer),
        train=TrainConfig(
            epochs=int(train.get("epochs", 500)),
            lr=float(train.get("lr", 0.001)),
            patience=int(train.get("patience", 50)),
            neg_ratio=int(train.get("neg_ratio", 1)),
            resample_negatives=train.get("resample_negatives", "true").lower() != "false",
        ),
        unlearn=UnlearnConfig(
            strategy=int(unlearn.get("strategy", 1)),
            alpha=float(unlearn.get("alpha", 0.5)),
            temperature=float(unlearn.get("temperature", 1.0)),
            epochs=int(unlearn.get("epochs", 200)),
            lr=float(unlearn.get("lr", 0.001)),
            retain_batch=parse_retain_batch(retain_batch),
            resample_pairs=unlearn.get("resample_pairs", "false").lower() == "true",
        ),
        out_dir=output.get("dir", cfg.out_dir),
    )


def parse_retain_batch(text):
    if text in (None, "", "auto"):
        return None
    if text == "all":
        return "all"
    return int(text)


def config_text(cfg: ExperimentConfig) -> str:
    """Render the effective configuration back to the INI format (for the run log)."""
    lines = [
        "[experiment]",
        f"seed = {cfg.seed}",
        f"arch = {cfg.arch}",
        "hidden = " + ",".join(str(d) for d in cfg.hidden),
        f"method = {cfg.method}",
        "",
        "[dataset]",
        f"kind = {cfg.dataset_kind}",
    ]
    if cfg.dataset_kind == "sbm":
        lines += [
            f"blocks = {cfg.sbm.blocks}",
            f"per_block = {cfg.sbm.per_block}",
            f"p_in = {cfg.sbm.p_in!r}",
            f"p_out = {cfg.sbm.p_out!r}",
            f"feature_dim = {cfg.sbm.feature_dim}",
        ]
    else:
        lines += [f"edges = {cfg.files.edges}"]
        if cfg.files.features:
            lines += [f"features = {cfg.files.features}"]
        lines += [f"feature_dim = {cfg.files.feature_dim}"]
    lines += [
        "",
        "[split]",
        f"val_frac = {cfg.val_frac!r}",
        f"test_frac = {cfg.test_frac!r}",
        "",
        "[forget]",
        f"ratio = {cfg.forget_ratio!r}",
        f"locality = {cfg.locality}",
    ]
    if cfg.nodes:
        lines += ["nodes = " + ",".join(str(n) for n in cfg.nodes)]
    lines += [
        "",
        "[train]",
        f"epochs = {cfg.train.epochs}",
        f"lr = {cfg.train.lr!r}",
        f"patience = {cfg.train.patience}",
        f"neg_ratio = {cfg.train.neg_ratio}",
        f"resample_negatives = {str(cfg.train.resample_negatives).lower()}",
        "",
        "[unlearn]",
        f"strategy = {cfg.unlearn.strategy}",
        f"alpha = {cfg.unlearn.alpha!r}",
        f"temperature = {cfg.unlearn.temperature!r}",
        f"epochs = {cfg.unlearn.epochs}",
        f"lr = {cfg.unlearn.lr!r}",
        "retain_batch = " + ("auto" if cfg.unlearn.retain_batch is None else str(cfg.unlearn.retain_batch)),
        f"destroyer = {cfg.destroyer}",
        f"resample_pairs = {str(cfg.unlearn.resample_pairs).lower()}",
        "",
        "[output]",
        f"dir = {cfg.out_dir}",
    ]
    return "\n".join(lines) + "\n"


def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(cfg, seed=seed)
