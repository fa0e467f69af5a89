"""Training and evaluation loops behind the command line.

Two protocols are supported.  ``memorize`` presents one input/target raster
pair over and over.  ``classify`` streams labelled examples in a fixed (or
seed-shuffled) order for a number of epochs and evaluates a majority-vote
classifier on held-out examples.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import Executor
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .config import ExperimentConfig
from .filters import raised_cosine_bank
from .inference import classify
from .learners import Learner, apply_lr_schedule, train_presentation
from .metrics import (PredictionRecord, accuracy, confusion_matrix, ece, grouped_entropy,
                      hidden_spike_rate)
from .network import ModelParams, Network, RunState, Topology, init_params, zero_params
from .objectives import estimate_log_loss
from .raster import (LabeledExample, RasterFormatError, load_manifest, load_raster,
                     split_memorization, synth_classification, synth_pattern)

CHECKPOINT_MAGIC = "mssnn-params 1"


class DataError(RuntimeError):
    """Unreadable, malformed or incompatible data."""


# ---------------------------------------------------------------- data


def memorization_example(cfg: ExperimentConfig) -> LabeledExample:
    """The single example of the memorization task.

    Rows ``0..num_inputs-1`` of the raster drive the inputs and the rest are
    visible targets.  Without a data file a random pattern is generated.
    """
    n = cfg.num_inputs + cfg.num_visible
    if cfg.data is None:
        raster = synth_pattern(cfg.data_seed, n, cfg.horizon, cfg.rate)
    else:
        raster = _read(load_raster, cfg.resolve(cfg.data))
        if raster.num_neurons != n:
            raise DataError(f"{cfg.data}: expected {n} rows (inputs + visible), "
                            f"found {raster.num_neurons}")
    return split_memorization(raster, cfg.num_inputs)


def classification_data(cfg: ExperimentConfig
                        ) -> tuple[list[LabeledExample], list[LabeledExample]]:
    """``(train, test)`` examples; the training set doubles as test set if none is given."""
    if cfg.manifest is None:
        data = synth_classification(cfg.data_seed, cfg.num_classes,
                                    cfg.num_train + cfg.num_test, cfg.num_inputs,
                                    cfg.horizon, cfg.rate, cfg.flip)
        return data[:cfg.num_train], data[cfg.num_train:]
    train = _read(load_manifest, cfg.resolve(cfg.manifest), cfg.num_visible)
    test = train
    if cfg.test_manifest is not None:
        test = _read(load_manifest, cfg.resolve(cfg.test_manifest), cfg.num_visible)
    for ex in train + test:
        check_compatible(cfg.network(), ex)
    return train, test


def _read(loader, path, *args):
    try:
        return loader(path, *args)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except RasterFormatError as exc:
        raise DataError(f"{path}: {exc}") from None
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def check_compatible(net: Network, example: LabeledExample) -> None:
    top = net.topology
    if example.input.num_neurons != top.num_inputs:
        raise DataError(f"data has {example.input.num_neurons} input channels, "
                        f"network expects {top.num_inputs}")
    if example.target.num_neurons != top.num_visible:
        raise DataError(f"data has {example.target.num_neurons} target channels, "
                        f"network has {top.num_visible} visible neurons")
    if example.label is not None and example.label >= top.num_visible:
        raise DataError(f"label {example.label} has no visible neuron")


# ---------------------------------------------------------------- report

REPORT_COLUMNS = ("step", "log_loss", "accuracy", "ece", "entropy_correct",
                  "entropy_incorrect", "hidden_spike_rate", "unicast_total",
                  "broadcast_total")


@dataclass
class ReportRow:
    step: int
    log_loss: float
    accuracy: Optional[float]
    ece: Optional[float]
    entropy_correct: Optional[float]
    entropy_incorrect: Optional[float]
    hidden_spike_rate: float
    unicast_total: int
    broadcast_total: int


@dataclass
class TrainReport:
    rows: list[ReportRow] = field(default_factory=list)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]

    def to_csv(self) -> bytes:
        """CSV with ``repr`` floats; quantities that do not apply are left empty."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in self.rows:
            writer.writerow("" if v is None else repr(v) for v in astuple(row))
        return buf.getvalue().encode("ascii")


assert tuple(f.name for f in fields(ReportRow)) == REPORT_COLUMNS


# ---------------------------------------------------------------- evaluation


def evaluate_classifier(params: ModelParams, net: Network, examples: list[LabeledExample],
                        cfg: ExperimentConfig, executor: Optional[Executor] = None) -> dict:
    """Majority-vote accuracy, calibration and log-loss on ``examples``.

    Example ``i`` uses seed ``eval_seed + i`` for both its votes and its
    log-loss realizations, so results do not depend on evaluation order.
    """
    records, probs, losses = [], [], []
    for i, ex in enumerate(examples):
        out = classify(params, net, ex.input, cfg.num_votes, cfg.eval_seed + i, executor)
        records.append(PredictionRecord.from_tally(out.tally, ex.label))
        probs.append(out.probs)
        losses.append(estimate_log_loss(params, net, ex, cfg.realizations,
                                        cfg.eval_seed + i, executor))
    right, wrong = grouped_entropy(records)
    return {
        "accuracy": accuracy(records),
        "ece": ece(records),
        "entropy_correct": right,
        "entropy_incorrect": wrong,
        "log_loss": math.fsum(losses) / len(losses),
        "records": records,
        "class_probs": probs,
        "confusion": confusion_matrix(records, net.topology.num_visible),
    }


def evaluate(params: ModelParams, net: Network, cfg: ExperimentConfig,
             executor: Optional[Executor] = None) -> dict:
    """Metrics of a trained model as a JSON-ready dict."""
    if cfg.task == "memorize":
        ex = memorization_example(cfg)
        check_compatible(net, ex)
        return {"task": "memorize",
                "log_loss": estimate_log_loss(params, net, ex, cfg.realizations,
                                              cfg.eval_seed, executor)}
    _, test = classification_data(cfg)
    for ex in test:
        check_compatible(net, ex)
    res = evaluate_classifier(params, net, test, cfg, executor)
    return {
        "task": "classify",
        "num_examples": len(test),
        "num_votes": cfg.num_votes,
        "accuracy": res["accuracy"],
        "ece": res["ece"],
        "entropy_correct": res["entropy_correct"],
        "entropy_incorrect": res["entropy_incorrect"],
        "log_loss": res["log_loss"],
        "examples": [{"label": r.target, "predicted": r.predicted,
                      "confidence": r.confidence, "entropy": r.entropy,
                      "class_probs": p.tolist()}
                     for r, p in zip(res["records"], res["class_probs"])],
        "confusion_matrix": res["confusion"].tolist(),
    }


# ---------------------------------------------------------------- training


def train(cfg: ExperimentConfig, executor: Optional[Executor] = None
          ) -> tuple[TrainReport, ModelParams, Network]:
    """Run the configured protocol; returns the report and the final parameters."""
    if cfg.task == "memorize":
        return _train_memorize(cfg, executor)
    return _train_classify(cfg, executor)


class _Tracker:
    """Cumulative step count and the hidden spikes since the last report row."""

    def __init__(self, learner: Learner):
        self.learner = learner
        self.steps = 0
        self.window_steps = 0
        self.window_spikes = 0

    def add(self, stats) -> None:
        self.steps += stats.steps
        self.window_steps += stats.steps
        self.window_spikes += stats.hidden_spikes

    def row(self, log_loss: float, res: Optional[dict] = None) -> ReportRow:
        c = self.learner.counters
        rate = hidden_spike_rate(self.window_spikes, self.window_steps)
        self.window_steps = self.window_spikes = 0
        res = res or {}
        return ReportRow(self.steps, log_loss, res.get("accuracy"), res.get("ece"),
                         res.get("entropy_correct"), res.get("entropy_incorrect"),
                         rate, c.unicast_total, c.broadcast_total)


def _setup(cfg: ExperimentConfig, executor):
    net = cfg.network()
    params = init_params(net, cfg.seed, cfg.init_scale)
    learner = Learner(net, cfg.learner_config())
    state = RunState(net, cfg.num_samples, cfg.seed, executor)
    return net, params, learner, state


def _train_memorize(cfg, executor):
    example = memorization_example(cfg)
    net, params, learner, state = _setup(cfg, executor)
    lcfg = learner.config
    track = _Tracker(learner)
    report = TrainReport()

    def log_loss():
        return estimate_log_loss(params, net, example, cfg.realizations, cfg.eval_seed,
                                 executor)

    report.rows.append(track.row(log_loss()))
    for p in range(cfg.presentations):
        eta = apply_lr_schedule(lcfg.learning_rate, p, lcfg)
        track.add(train_presentation(learner, state, params, example, eta))
        if (p + 1) % cfg.eval_every == 0 or p + 1 == cfg.presentations:
            report.rows.append(track.row(log_loss()))
    return report, params, net


def _train_classify(cfg, executor):
    train_set, test_set = classification_data(cfg)
    net, params, learner, state = _setup(cfg, executor)
    lcfg = learner.config
    track = _Tracker(learner)
    report = TrainReport()
    shuffler = np.random.default_rng(cfg.data_seed)

    def row():
        res = evaluate_classifier(params, net, test_set, cfg, executor)
        return track.row(res["log_loss"], res)

    report.rows.append(row())
    seen = 0
    for epoch in range(cfg.epochs):
        order = shuffler.permutation(len(train_set)) if cfg.shuffle else range(len(train_set))
        eta = apply_lr_schedule(lcfg.learning_rate, epoch, lcfg)
        for i in order:
            track.add(train_presentation(learner, state, params, train_set[i], eta))
            seen += 1
            if seen % cfg.eval_every == 0:
                report.rows.append(row())
    if seen % cfg.eval_every != 0:
        report.rows.append(row())
    return report, params, net


# ---------------------------------------------------------------- checkpoints


def checkpoint_bytes(params: ModelParams, net: Network) -> bytes:
    """ASCII dump: a header, then ``neuron source|self|bias basis value`` lines.

    Values use 17 significant digits, so a reload is bit-exact.
    """
    top = net.topology
    sb, mb = net.synaptic_bank, net.somatic_bank
    lines = [
        CHECKPOINT_MAGIC,
        f"topology {top.num_inputs} {top.num_hidden} {top.num_visible}",
        f"filters {sb.num_basis} {sb.duration} {mb.num_basis} {mb.duration}",
        f"edges {int(top.connectivity.sum())}",
    ]
    lines += [f"{i} {j}" for i, j in zip(*np.nonzero(top.connectivity))]
    for i, j in zip(*np.nonzero(top.connectivity)):
        for m in range(sb.num_basis):
            lines.append(f"{i} {j} {m} {params.synaptic[i, j, m]:.17g}")
    for i in range(top.num_neurons):
        for m in range(mb.num_basis):
            lines.append(f"{i} self {m} {params.somatic[i, m]:.17g}")
        lines.append(f"{i} bias 0 {params.bias[i]:.17g}")
    return ("\n".join(lines) + "\n").encode("ascii")


def save_checkpoint(params: ModelParams, net: Network, path: Union[str, Path]) -> None:
    Path(path).write_bytes(checkpoint_bytes(params, net))


def load_checkpoint(path: Union[str, Path]) -> tuple[ModelParams, Network]:
    """Inverse of :func:`save_checkpoint`; raises :class:`DataError` on bad input."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="ascii").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from None
    try:
        return _parse_checkpoint(lines)
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed checkpoint ({exc})") from None


def _parse_checkpoint(lines: list[str]) -> tuple[ModelParams, Network]:
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError("bad magic line")

    def header(idx, tag, count):
        parts = lines[idx].split()
        if parts[0] != tag or len(parts) != count + 1:
            raise ValueError(f"line {idx + 1}: expected '{tag}' header")
        return [int(x) for x in parts[1:]]

    n_in, n_hid, n_vis = header(1, "topology", 3)
    sm, sd, mm, md = header(2, "filters", 4)
    (n_edges,) = header(3, "edges", 1)
    n = n_hid + n_vis
    conn = np.zeros((n, n_in + n), dtype=bool)
    for line in lines[4:4 + n_edges]:
        i, j = (int(x) for x in line.split())
        conn[i, j] = True
    net = Network(Topology(n_in, n_hid, n_vis, conn), raised_cosine_bank(sm, sd),
                  raised_cosine_bank(mm, md))
    params = zero_params(net)
    filled = 0
    for line in lines[4 + n_edges:]:
        i, src, m, value = line.split()
        i, m, value = int(i), int(m), float(value)
        if src == "self":
            params.somatic[i, m] = value
        elif src == "bias":
            params.bias[i] = value
        else:
            if not conn[i, int(src)]:
                raise ValueError(f"weight on missing edge {i} <- {src}")
            params.synaptic[i, int(src), m] = value
        filled += 1
    expected = n_edges * sm + n * (mm + 1)
    if filled != expected:
        raise ValueError(f"expected {expected} parameter lines, found {filled}")
    return params, net
