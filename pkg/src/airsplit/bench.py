"""Experiment harness: configs, datasets, system assembly, runs, and costs.

Everything a run produces is a pure function of its config: channels come
from a dedicated channel seed (shared by every run seed so they compare on
identical links), the dataset from its own seed, and each run seed drives
initialization, batch sampling, and noise.  Metric files are written with
repr-formatted floats, so re-running a config reproduces them byte for byte.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import (NOISELESS, ChannelState, NoiseModel, channel_snr,
                      sample_channel, save_channel)
from .linalg import crandn, make_rng
from .nn import (Adam, ComplexBatchNorm, ComplexNet, CRelu, Dense, Sgd,
                 modulus_softmax_loss)
from .oac import OacDesign, OacLayer, ideal_matrices
from .runtime import BatchMetrics, CommLossConfig, SplitLink, SplitSystem

__all__ = [
    "ConfigError",
    "DataConfig",
    "TrainConfig",
    "ExperimentConfig",
    "config_to_dict",
    "config_from_dict",
    "apply_overrides",
    "preset",
    "PRESET_NAMES",
    "Dataset",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
    "as_images",
    "CentralizedSystem",
    "build_system",
    "link_snr",
    "run_experiment",
    "LayerSpec",
    "CostRow",
    "cost_report",
    "CostComparisonRow",
    "cost_comparison",
]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class DataConfig:
    n_features: int = 16
    n_classes: int = 10
    train_per_class: int = 400
    test_per_class: int = 100
    separation: float = 0.85
    seed: int = 7


@dataclass
class TrainConfig:
    batch_size: int = 64
    steps: int = 1500
    lr: float = 0.005
    optimizer: str = "adam"
    eval_every: int = 250
    log_every: int = 25


@dataclass
class ExperimentConfig:
    """One sweep: r values x SNR values x run seeds on fixed channels."""

    name: str = "custom"
    n_nodes: int = 3
    n_tx: int = 16
    n_rx: int = 16
    n_paths: int = 4
    side: str = "receiver"
    form: str = "auto"
    r_values: tuple = (4,)
    snr_values: tuple = (10.0,)
    seeds: tuple = (0, 1, 2)
    channel_seed: int = 1000
    rho: float = 0.0
    baseline: str = "proposed"       # proposed | ideal | centralized
    comm_weight: float = 0.0         # 0 disables the subspace penalty
    bias: bool = True
    forward_rescale: bool = True
    backward_rescale: str = "auto"   # auto | on | off
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)


def _require(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    _require(cfg.n_nodes >= 2, "n_nodes", "need at least two nodes")
    for name in ("n_tx", "n_rx", "n_paths"):
        _require(getattr(cfg, name) >= 1, name, "must be >= 1")
    _require(cfg.side in ("transmitter", "receiver"), "side",
             "must be 'transmitter' or 'receiver'")
    _require(cfg.form in ("auto", "combined", "separated"), "form",
             "must be 'auto', 'combined' or 'separated'")
    _require(len(cfg.r_values) > 0, "r_values", "must not be empty")
    for r in cfg.r_values:
        _require(int(r) >= 1, "r_values", "entries must be >= 1")
    _require(len(cfg.snr_values) > 0, "snr_values", "must not be empty")
    _require(len(cfg.seeds) > 0, "seeds", "must not be empty")
    _require(0.0 <= cfg.rho <= 1.0, "rho", "must lie in [0, 1]")
    _require(cfg.baseline in ("proposed", "ideal", "centralized"), "baseline",
             "must be 'proposed', 'ideal' or 'centralized'")
    _require(cfg.comm_weight >= 0.0, "comm_weight", "must be >= 0")
    _require(cfg.backward_rescale in ("auto", "on", "off"), "backward_rescale",
             "must be 'auto', 'on' or 'off'")
    d, t = cfg.data, cfg.train
    _require(d.n_features >= 1, "data.n_features", "must be >= 1")
    _require(d.n_classes >= 2, "data.n_classes", "must be >= 2")
    _require(d.train_per_class >= 1, "data.train_per_class", "must be >= 1")
    _require(d.test_per_class >= 1, "data.test_per_class", "must be >= 1")
    _require(d.separation > 0, "data.separation", "must be > 0")
    _require(t.batch_size >= 1, "train.batch_size", "must be >= 1")
    _require(t.steps >= 1, "train.steps", "must be >= 1")
    _require(t.lr > 0, "train.lr", "must be > 0")
    _require(t.optimizer in ("adam", "sgd"), "train.optimizer",
             "must be 'adam' or 'sgd'")
    _require(t.eval_every >= 1, "train.eval_every", "must be >= 1")
    _require(t.log_every >= 1, "train.log_every", "must be >= 1")
    return cfg


def _snr_to_json(v):
    return "inf" if math.isinf(v) else float(v)


def _snr_from_json(v, path: str) -> float:
    if v == "inf":
        return float("inf")
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected a number or 'inf', got {v!r}") from None


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = dataclasses.asdict(cfg)
    out["r_values"] = [int(r) for r in cfg.r_values]
    out["snr_values"] = [_snr_to_json(s) for s in cfg.snr_values]
    out["seeds"] = [int(s) for s in cfg.seeds]
    return out


def _build_section(cls, record: dict, path: str):
    if not isinstance(record, dict):
        raise ConfigError(f"{path}: expected an object")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in record:
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown field")
    return cls(**record)


def config_from_dict(record: dict) -> ExperimentConfig:
    if not isinstance(record, dict):
        raise ConfigError("config: expected an object")
    record = dict(record)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in record:
        if key not in known:
            raise ConfigError(f"{key}: unknown field")
    if "data" in record:
        record["data"] = _build_section(DataConfig, record["data"], "data")
    if "train" in record:
        record["train"] = _build_section(TrainConfig, record["train"], "train")
    if "snr_values" in record:
        record["snr_values"] = tuple(
            _snr_from_json(v, "snr_values") for v in record["snr_values"])
    for key in ("r_values", "seeds"):
        if key in record:
            record[key] = tuple(int(v) for v in record[key])
    try:
        cfg = ExperimentConfig(**record)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return validate_config(cfg)


def apply_overrides(record: dict, overrides) -> dict:
    """Apply 'path.to.field=value' strings onto a config dict.

    Values parse as JSON when possible and fall back to the raw string, so
    both lr=0.01 and optimizer=sgd work without quoting games.
    """
    out = json.loads(json.dumps(record))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        node = out
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"override {key!r}: no such section {part!r}")
            node = node[part]
        node[parts[-1]] = value
    return out


def preset(name: str) -> ExperimentConfig:
    """A named ready-to-run configuration."""
    if name == "complex_2node":
        return ExperimentConfig(
            name=name, n_nodes=2, n_tx=16, n_rx=16, n_paths=20,
            r_values=(16,), snr_values=(35.0,), seeds=(0, 1, 2))
    if name == "sparse_3node":
        return ExperimentConfig(
            name=name, n_nodes=3, n_tx=16, n_rx=16, n_paths=4,
            r_values=(4,), snr_values=(10.0,), seeds=(0, 1, 2),
            comm_weight=1e-3)
    if name == "massive_3node":
        return ExperimentConfig(
            name=name, n_nodes=3, n_tx=64, n_rx=64, n_paths=8,
            r_values=(8,), snr_values=(10.0,), seeds=(0,),
            comm_weight=1e-3)
    if name == "moving_3node":
        return ExperimentConfig(
            name=name, n_nodes=3, n_tx=16, n_rx=16, n_paths=4,
            r_values=(4,), snr_values=(10.0,), seeds=(0, 1, 2),
            rho=1e-4)
    raise ConfigError(f"unknown preset {name!r}")


PRESET_NAMES = ("complex_2node", "sparse_3node", "massive_3node", "moving_3node")


# -- data ---------------------------------------------------------------------

@dataclass
class Dataset:
    train_x: np.ndarray          # (features, n_train) complex
    train_y: np.ndarray          # (n_train,) int
    test_x: np.ndarray
    test_y: np.ndarray
    centers: np.ndarray          # (classes, features) complex


def generate_dataset(cfg: DataConfig) -> Dataset:
    """Complex Gaussian class clusters with unit within-class noise.

    Class centers are drawn once with per-entry variance separation^2, so
    separation directly controls how far apart the clusters sit relative to
    the noise.  The train/test split and the training order are fixed by the
    data seed alone.
    """
    rng = make_rng(cfg.seed, 0)
    f, c = cfg.n_features, cfg.n_classes
    per = cfg.train_per_class + cfg.test_per_class
    centers = crandn(rng, (c, f), var=cfg.separation ** 2)
    samples = centers[:, :, None] + crandn(rng, (c, f, per), var=1.0)
    train_x = np.concatenate([samples[i, :, :cfg.train_per_class] for i in range(c)], axis=1)
    test_x = np.concatenate([samples[i, :, cfg.train_per_class:] for i in range(c)], axis=1)
    train_y = np.repeat(np.arange(c), cfg.train_per_class)
    test_y = np.repeat(np.arange(c), cfg.test_per_class)
    order = rng.permutation(train_y.size)
    return Dataset(train_x=train_x[:, order], train_y=train_y[order],
                   test_x=test_x, test_y=test_y, centers=centers)


def save_dataset(ds: Dataset, path) -> None:
    np.savez(path, train_x=ds.train_x, train_y=ds.train_y,
             test_x=ds.test_x, test_y=ds.test_y, centers=ds.centers)


def load_dataset(path) -> Dataset:
    with np.load(path) as data:
        return Dataset(train_x=data["train_x"], train_y=data["train_y"],
                       test_x=data["test_x"], test_y=data["test_y"],
                       centers=data["centers"])


def as_images(x: np.ndarray, channels: int, height: int, width: int) -> np.ndarray:
    """Reshape (features, batch) columns into (batch, C, H, W) maps."""
    f, b = x.shape
    if channels * height * width != f:
        raise ValueError("channels * height * width must equal the feature count")
    return x.T.reshape(b, channels, height, width)


# -- systems ------------------------------------------------------------------

class CentralizedSystem:
    """The no-radio reference: the same stack with plain dense links."""

    def __init__(self, net: ComplexNet, loss=modulus_softmax_loss):
        self.net = net
        self.loss = loss

    def parameters(self) -> dict:
        return self.net.parameters()

    def trainable_parameters(self) -> dict:
        return self.net.parameters()

    def train_batch(self, x, labels, optimizer) -> BatchMetrics:
        logits, caches = self.net.forward(x, train=True)
        loss, g, acc = self.loss(logits, labels)
        _, grads = self.net.backward(caches, g)
        optimizer.step(self.net.parameters(), grads)
        return BatchMetrics(loss=loss, accuracy=acc, comm_loss=0.0)

    def evaluate(self, x, labels, batch_size: int = 256):
        n = x.shape[-1]
        total_loss, correct = 0.0, 0.0
        for start in range(0, n, batch_size):
            sl = slice(start, min(start + batch_size, n))
            logits, _ = self.net.forward(x[..., sl], train=False)
            loss, _, acc = self.loss(logits, labels[sl])
            total_loss += loss * (sl.stop - sl.start)
            correct += acc * (sl.stop - sl.start)
        return total_loss / n, correct / n


def _node_stacks(cfg: ExperimentConfig, rng) -> list:
    """Layer stacks for every node, drawn in node order from one rng."""
    f = cfg.data.n_features
    h = cfg.n_tx
    classes = cfg.data.n_classes
    stacks = [[Dense(f, h, rng), ComplexBatchNorm(h), CRelu()]]
    for _ in range(cfg.n_nodes - 2):
        stacks.append([ComplexBatchNorm(h), CRelu(), Dense(h, h, rng),
                       ComplexBatchNorm(h), CRelu()])
    stacks.append([ComplexBatchNorm(h), CRelu(), Dense(h, classes, rng)])
    return stacks


def _resolve_form(cfg: ExperimentConfig, r: int) -> str:
    if cfg.form != "auto":
        return cfg.form
    return "combined" if r == min(cfg.n_tx, cfg.n_rx) else "separated"


def _resolve_backward_rescale(cfg: ExperimentConfig) -> bool:
    if cfg.backward_rescale == "auto":
        return cfg.train.optimizer == "sgd"
    return cfg.backward_rescale == "on"


def build_system(cfg: ExperimentConfig, r: int, snr_db: float, seed: int,
                 channels: list):
    """Assemble the system one run trains, plus its optimizer.

    Parameter draw order is fixed: node stacks first (in node order,
    interleaved dense layers as they appear), then each link's layer.  The
    centralized baseline replaces every link with a dense layer drawn at the
    same point, so its width matches exactly.
    """
    n_links = cfg.n_nodes - 1
    if cfg.baseline != "centralized" and len(channels) != n_links:
        raise ValueError(f"need {n_links} channels, got {len(channels)}")
    init_rng = make_rng(seed, 1)
    opt = Adam(cfg.train.lr) if cfg.train.optimizer == "adam" else Sgd(cfg.train.lr)
    stacks = _node_stacks(cfg, init_rng)
    h = cfg.n_tx
    if cfg.baseline == "centralized":
        layers = []
        for i, stack in enumerate(stacks):
            layers.extend(stack)
            if i < n_links:
                layers.append(Dense(h, h, init_rng, bias=cfg.bias))
        return CentralizedSystem(ComplexNet(layers)), opt
    form = _resolve_form(cfg, r)
    if cfg.baseline == "ideal":
        form = "separated"
    design = OacDesign(cfg.side, form)
    noise = NOISELESS if math.isinf(snr_db) else NoiseModel(snr_db=snr_db)
    links = []
    for i in range(n_links):
        layer = OacLayer(design, h, h, cfg.n_tx, cfg.n_rx, r, init_rng,
                         bias=cfg.bias, forward_rescale=cfg.forward_rescale,
                         backward_rescale=_resolve_backward_rescale(cfg))
        comm = CommLossConfig(enabled=False)
        if cfg.baseline == "ideal":
            p_slim, c_slim = ideal_matrices(channels[i], r)
            layer.params["P"][...] = p_slim
            layer.params["C"][...] = c_slim
            layer.freeze("P", "C")
        elif cfg.comm_weight > 0.0:
            comm = CommLossConfig(enabled=True, weight=cfg.comm_weight)
        links.append(SplitLink(
            layer, channels[i], noise,
            noise_rng_f=make_rng(seed, 3, i), noise_rng_b=make_rng(seed, 4, i),
            comm=comm, rho=cfg.rho, evolve_rng=make_rng(seed, 5, i)))
    nodes = [ComplexNet(stack) for stack in stacks]
    return SplitSystem(nodes, links), opt


def link_snr(channel: ChannelState, noise: NoiseModel) -> float:
    """The realized link SNR in dB under a noise model."""
    power = noise.total_power(channel)
    return channel_snr(channel, power)


# -- runs ---------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _snr_tag(snr_db: float) -> str:
    if math.isinf(snr_db):
        return "inf"
    if float(snr_db) == int(snr_db):
        return str(int(snr_db))
    return str(float(snr_db)).replace("-", "m")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _single_run(cfg: ExperimentConfig, ds: Dataset, channels: list, r: int,
                snr_db: float, seed: int, runs_dir: Path) -> dict:
    system, opt = build_system(cfg, r, snr_db, seed, channels)
    batch_rng = make_rng(seed, 0)
    n_train = ds.train_y.size
    t = cfg.train
    rows = []
    metrics = None
    for step in range(1, t.steps + 1):
        idx = batch_rng.integers(0, n_train, size=t.batch_size)
        metrics = system.train_batch(ds.train_x[:, idx], ds.train_y[idx], opt)
        if step % t.log_every == 0 or step == t.steps:
            rows.append(("train", step, metrics.loss, metrics.accuracy,
                         metrics.comm_loss))
        if step % t.eval_every == 0 and step != t.steps:
            ev_loss, ev_acc = system.evaluate(ds.test_x, ds.test_y)
            rows.append(("eval", step, ev_loss, ev_acc, ""))
    ev_loss, ev_acc = system.evaluate(ds.test_x, ds.test_y)
    rows.append(("final", t.steps, ev_loss, ev_acc, ""))
    name = f"r{r}_snr{_snr_tag(snr_db)}_seed{seed}.csv"
    _write_csv(runs_dir / name, ("phase", "step", "loss", "accuracy", "comm_loss"),
               rows)
    return {
        "r": r, "snr_db": snr_db, "seed": seed, "status": "ok",
        "steps": t.steps, "train_loss": metrics.loss,
        "train_accuracy": metrics.accuracy, "eval_loss": ev_loss,
        "eval_accuracy": ev_acc, "file": name,
    }


def run_experiment(cfg: ExperimentConfig, out_dir) -> list:
    """Run the full sweep of a config and write all artifacts under out_dir.

    Files: config.json, channels/link*.json, runs/<combo>.csv per run,
    summary.csv (one row per run) and aggregate.csv (mean and spread over
    seeds).  A failing run is recorded with its error class and the sweep
    continues.  Returns the summary rows.
    """
    validate_config(cfg)
    out = Path(out_dir)
    runs_dir = out / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    with open(out / "config.json", "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    ds = generate_dataset(cfg.data)
    n_links = cfg.n_nodes - 1
    channels = []
    if cfg.baseline != "centralized":
        ch_dir = out / "channels"
        ch_dir.mkdir(exist_ok=True)
        for i in range(n_links):
            state = sample_channel(cfg.n_tx, cfg.n_rx, cfg.n_paths,
                                   make_rng(cfg.channel_seed, 2, i))
            save_channel(state, ch_dir / f"link{i}.json")
            channels.append(state)
    summary = []
    for r in cfg.r_values:
        for snr_db in cfg.snr_values:
            for seed in cfg.seeds:
                try:
                    row = _single_run(cfg, ds, channels, r, snr_db, seed, runs_dir)
                except Exception as exc:   # keep sweeping, record the failure
                    row = {"r": r, "snr_db": snr_db, "seed": seed,
                           "status": f"failed:{type(exc).__name__}",
                           "steps": 0, "train_loss": "", "train_accuracy": "",
                           "eval_loss": "", "eval_accuracy": "", "file": ""}
                summary.append(row)
    header = ("r", "snr_db", "seed", "status", "steps", "train_loss",
              "train_accuracy", "eval_loss", "eval_accuracy", "file")
    _write_csv(out / "summary.csv", header,
               [[row[k] for k in header] for row in summary])
    agg_rows = []
    for r in cfg.r_values:
        for snr_db in cfg.snr_values:
            accs = [row["eval_accuracy"] for row in summary
                    if row["r"] == r and row["snr_db"] == snr_db
                    and row["status"] == "ok"]
            losses = [row["eval_loss"] for row in summary
                      if row["r"] == r and row["snr_db"] == snr_db
                      and row["status"] == "ok"]
            if accs:
                agg_rows.append((r, _snr_to_json(snr_db), len(accs),
                                 float(np.mean(accs)), float(np.std(accs)),
                                 float(np.mean(losses)), float(np.std(losses))))
            else:
                agg_rows.append((r, _snr_to_json(snr_db), 0, "", "", "", ""))
    _write_csv(out / "aggregate.csv",
               ("r", "snr_db", "n_ok", "mean_accuracy", "std_accuracy",
                "mean_loss", "std_loss"), agg_rows)
    return summary


# -- cost accounting ----------------------------------------------------------

@dataclass(frozen=True)
class LayerSpec:
    """Sizes entering the cost formulas.

    Dense sizes are always required; the conv fields switch on the four
    convolutional rows.  batch scales the per-batch MAC and transmission
    counts.
    """

    n_i: int
    n_o: int
    n_t: int
    n_r: int
    r: int
    batch: int = 1
    n_ci: int | None = None
    n_co: int | None = None
    n_k: int | None = None
    n_hi: int | None = None
    n_wi: int | None = None
    n_ho: int | None = None
    n_wo: int | None = None

    def __post_init__(self):
        for name in ("n_i", "n_o", "n_t", "n_r", "r", "batch"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be >= 1")
        conv = [self.n_ci, self.n_co, self.n_k, self.n_hi, self.n_wi,
                self.n_ho, self.n_wo]
        given = [v is not None for v in conv]
        if any(given) and not all(given):
            raise ConfigError("conv sizes must be given all together or not at all")
        if all(given) and any(v < 1 for v in conv):
            raise ConfigError("conv sizes must be >= 1")

    @property
    def has_conv(self) -> bool:
        return self.n_ci is not None


@dataclass(frozen=True)
class CostRow:
    kind: str                    # "fc" | "conv"
    side: str
    form: str
    parameters: int
    macs: int
    transmissions: int


def cost_report(spec: LayerSpec) -> list:
    """Parameter, MAC and per-batch transmission counts of every design.

    Uses ceil-based channel-use counts, which reduce to the familiar closed
    forms whenever r divides the chunked dimension.  The convolutional
    parameter column counts kernel parameters per input channel, matching
    the dense column's structure.
    """
    s = spec
    b = s.batch
    rows = []
    kt = math.ceil(s.n_o / s.r)
    kr = math.ceil(s.n_i / s.r)
    rows.append(CostRow("fc", "transmitter", "combined",
                        kt * s.n_t * s.n_i + s.n_r * s.r,
                        b * kt * (s.n_t * s.n_i + s.r * s.n_r),
                        b * kt))
    rows.append(CostRow("fc", "transmitter", "separated",
                        kt * s.r * s.n_i + (s.n_t + s.n_r) * s.r,
                        b * kt * s.r * (s.n_i + s.n_t + s.n_r),
                        b * kt))
    rows.append(CostRow("fc", "receiver", "combined",
                        kr * s.n_o * s.n_r + s.n_t * s.r,
                        b * kr * (s.n_t * s.r + s.n_o * s.n_r),
                        b * kr))
    rows.append(CostRow("fc", "receiver", "separated",
                        kr * s.r * s.n_o + (s.n_t + s.n_r) * s.r,
                        b * kr * s.r * (s.n_o + s.n_t + s.n_r),
                        b * kr))
    if not s.has_conv:
        return rows
    nk2 = s.n_k * s.n_k
    out_pix = s.n_ho * s.n_wo
    in_pix = s.n_hi * s.n_wi
    kct = math.ceil(s.n_co / s.r)
    kcr = math.ceil(s.n_ci / s.r)
    rows.append(CostRow("conv", "transmitter", "combined",
                        kct * s.n_t * nk2 + s.n_r * s.r,
                        b * kct * out_pix * (s.n_ci * s.n_t * nk2 + s.r * s.n_r),
                        b * kct * out_pix))
    rows.append(CostRow("conv", "transmitter", "separated",
                        kct * s.r * nk2 + (s.n_t + s.n_r) * s.r,
                        b * kct * s.r * out_pix * (s.n_ci * nk2 + s.n_t + s.n_r),
                        b * kct * out_pix))
    rows.append(CostRow("conv", "receiver", "combined",
                        kct * s.n_r * nk2 + s.n_t * s.r,
                        b * kcr * (s.n_co * out_pix * nk2 * s.n_r
                                   + s.r * in_pix * s.n_t),
                        b * kcr * in_pix))
    rows.append(CostRow("conv", "receiver", "separated",
                        s.n_co * nk2 + (s.n_t + s.n_r) * s.r,
                        b * s.n_ci * s.n_co * out_pix * nk2
                        + b * kcr * s.r * in_pix * (s.n_t + s.n_r),
                        b * kcr * in_pix))
    return rows


@dataclass(frozen=True)
class CostComparisonRow:
    algorithm: str
    computation: str             # symbolic: which cost terms apply
    transmission_factor: float   # relative to a plain digital split
    transmission_bound: bool     # True when the factor is an upper bound
    estimation_factor: float     # channel estimation relative cost
    estimation_bound: bool


def cost_comparison(r: int, symbols_per_value: int = 16) -> list:
    """Relative transmission and channel-estimation costs of four schemes.

    The analog schemes move one complex value per stream per use, while a
    digital link spends symbols_per_value symbols on it, hence the 1/(16 r)
    style factors.  The reciprocity-trained scheme never estimates the
    channel at all.
    """
    if r < 1:
        raise ConfigError("r: must be >= 1")
    if symbols_per_value < 1:
        raise ConfigError("symbols_per_value: must be >= 1")
    q = float(symbols_per_value * r)
    return [
        CostComparisonRow("traditional", "network", 1.0, False, 1.0, False),
        CostComparisonRow("mimo_split", "network+mixing", 1.0 / r, False,
                          1.0 / r, False),
        CostComparisonRow("ideal", "network+mixing", 1.0 / q, True,
                          1.0 / q, True),
        CostComparisonRow("proposed", "network+mixing", 1.0 / q, True,
                          0.0, False),
    ]
