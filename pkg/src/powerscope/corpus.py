"""Window extraction, dataset assembly, and on-disk persistence.

A corpus is a set of 150-sample labeled windows cut from synthetic runs,
with a deterministic train/test split assigned at *run* granularity so
windows from one run never straddle the split.  Datasets persist as
newline-delimited JSON records plus a sidecar manifest holding the full
generation config and master seed.
"""

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import rng as rngmod
from . import tracegen
from .errors import ConfigError, FormatError, ParameterError
from .tracegen import (CLASS_ORDER, BUILTIN_PROFILES, ClassLabel, DeviceProfile,
                       PowerRun, ScanModel, VariantKind, WINDOW_LEN)

TRAIN, TEST = "train", "test"


@dataclass
class LabeledWindow:
    """One 150-sample detector input with its provenance."""

    samples: np.ndarray
    mask: np.ndarray
    label: ClassLabel
    variant: VariantKind
    device: str
    run_id: str
    offset: int = 0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=np.uint8)
        if self.samples.shape != (WINDOW_LEN,):
            raise ParameterError(f"window must have exactly {WINDOW_LEN} samples")
        if self.mask.shape != (WINDOW_LEN,):
            raise ParameterError("window mask length mismatch")


def windowize(run, stride=WINDOW_LEN):
    """Cut a run into windows at offsets 0, stride, 2*stride, ... as long
    as a full window fits."""
    if stride < 1:
        raise ParameterError("stride must be a positive integer")
    n = len(run.samples)
    if n < WINDOW_LEN:
        raise ParameterError(
            f"run too short to windowize: {n} < {WINDOW_LEN} samples")
    out = []
    for off in range(0, n - WINDOW_LEN + 1, stride):
        out.append(LabeledWindow(
            samples=run.samples[off:off + WINDOW_LEN].copy(),
            mask=run.perturb_mask[off:off + WINDOW_LEN].copy(),
            label=run.label, variant=run.variant, device=run.device,
            run_id=run.run_id, offset=off))
    return out


@dataclass(frozen=True)
class CorpusConfig:
    """Generation parameters for a clean three-class corpus."""

    profiles: tuple = BUILTIN_PROFILES
    runs_per_class: int = 40
    run_length: int = WINDOW_LEN
    stride: int = WINDOW_LEN
    train_frac: float = 0.85
    scan: ScanModel = tracegen.DEFAULT_SCAN
    burst_rate_hz: float = tracegen.DEFAULT_BURST_RATE_HZ
    burst_amp_uA: float = tracegen.DEFAULT_BURST_AMP_UA
    burst_mean_dur_samples: int = tracegen.DEFAULT_BURST_MEAN_DUR

    def to_dict(self):
        return {
            "profiles": [
                {"id": p.id, "baseline_uA": p.baseline_uA,
                 "noise_sigma_uA": p.noise_sigma_uA, "amp_scale": p.amp_scale}
                for p in self.profiles],
            "runs_per_class": self.runs_per_class,
            "run_length": self.run_length,
            "stride": self.stride,
            "train_frac": self.train_frac,
            "scan": {"period_samples": self.scan.period_samples,
                     "spike_amp_uA": self.scan.spike_amp_uA,
                     "spike_width_samples": self.scan.spike_width_samples,
                     "jitter_sigma": self.scan.jitter_sigma},
            "burst_rate_hz": self.burst_rate_hz,
            "burst_amp_uA": self.burst_amp_uA,
            "burst_mean_dur_samples": self.burst_mean_dur_samples,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                profiles=tuple(DeviceProfile(**p) for p in d["profiles"]),
                runs_per_class=d["runs_per_class"],
                run_length=d["run_length"],
                stride=d["stride"],
                train_frac=d["train_frac"],
                scan=ScanModel(**d["scan"]),
                burst_rate_hz=d["burst_rate_hz"],
                burst_amp_uA=d["burst_amp_uA"],
                burst_mean_dur_samples=d["burst_mean_dur_samples"],
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad corpus config: {exc}") from None


def config_digest(config_dict, master_seed):
    """Short stable digest of a generation config + seed, embedded in
    every derived output file."""
    blob = json.dumps({"config": config_dict, "master_seed": master_seed},
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Corpus:
    """An immutable window collection with its split and manifest."""

    windows: list
    split: list   # parallel list of TRAIN/TEST tags
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.windows) != len(self.split):
            raise ParameterError("split assignment must match window count")

    def subset(self, tag):
        return [w for w, s in zip(self.windows, self.split) if s == tag]

    @property
    def train(self):
        return self.subset(TRAIN)

    @property
    def test(self):
        return self.subset(TEST)


def _split_runs_by_class(run_labels, run_ids, train_frac, split_rng):
    """Assign each run to TRAIN/TEST: the global test count is
    round((1-train_frac) * n_runs), distributed over classes by largest
    remainder (ties by class order), runs chosen by seeded shuffle."""
    n_runs = len(run_ids)
    n_test_total = int(round((1.0 - train_frac) * n_runs))
    by_class = {label: [] for label in CLASS_ORDER}
    for rid, label in zip(run_ids, run_labels):
        by_class[label].append(rid)

    quotas = {}
    remainders = []
    for label in CLASS_ORDER:
        exact = (1.0 - train_frac) * len(by_class[label])
        quotas[label] = int(exact)
        remainders.append((-(exact - int(exact)), label.index, label))
    leftover = n_test_total - sum(quotas.values())
    for _, _, label in sorted(remainders):
        if leftover <= 0:
            break
        quotas[label] += 1
        leftover -= 1

    assignment = {}
    for label in CLASS_ORDER:
        ids = sorted(by_class[label])
        split_rng.shuffle(ids)
        for i, rid in enumerate(ids):
            assignment[rid] = TEST if i < quotas[label] else TRAIN
    return assignment


def build_corpus(config, master_seed):
    """Generate runs for every device x class, windowize, and split.

    Each run's random stream is derived from (master_seed, device index,
    class index, run index), so generation order is irrelevant.
    """
    if len(config.profiles) < 1:
        raise ConfigError("config must name at least one device profile")
    if config.runs_per_class < 4:
        raise ConfigError("runs_per_class must be >= 4 to honor the split")
    if not 0.0 < config.train_frac < 1.0:
        raise ConfigError("train_frac must be in (0, 1)")
    if config.run_length < WINDOW_LEN:
        raise ConfigError(f"run_length must be >= {WINDOW_LEN}")

    windows = []
    run_ids, run_labels = [], []
    for d_idx, profile in enumerate(config.profiles):
        for label in CLASS_ORDER:
            for r in range(config.runs_per_class):
                run_rng = rngmod.stream(master_seed, rngmod.DOMAIN_CORPUS,
                                        d_idx, label.index, r)
                run = tracegen.synth_run(
                    label, profile, config.run_length, run_rng,
                    scan=config.scan,
                    burst_rate_hz=config.burst_rate_hz,
                    burst_amp_uA=config.burst_amp_uA,
                    burst_mean_dur_samples=config.burst_mean_dur_samples)
                run.run_id = f"{profile.id}/{label.value}/{r:05d}"
                run_ids.append(run.run_id)
                run_labels.append(label)
                windows.extend(windowize(run, config.stride))

    split_rng = rngmod.stream(master_seed, rngmod.DOMAIN_CORPUS, 0xB5)
    assignment = _split_runs_by_class(run_labels, run_ids,
                                      config.train_frac, split_rng)
    split = [assignment[w.run_id] for w in windows]

    cfg = config.to_dict()
    manifest = {
        "format": "powerscope-corpus",
        "version": 1,
        "master_seed": master_seed,
        "config": cfg,
        "config_digest": config_digest(cfg, master_seed),
        "n_windows": len(windows),
        "n_train": split.count(TRAIN),
        "n_test": split.count(TEST),
    }
    return Corpus(windows, split, manifest)


def as_arrays(windows):
    """Stack windows into (X, y) arrays for the detectors."""
    if not windows:
        raise ParameterError("empty window list")
    x = np.stack([w.samples for w in windows])
    y = np.array([w.label.index for w in windows], dtype=np.int64)
    return x, y


# ---------------------------------------------------------------------------
# Persistence

_DATASET_NAME = "corpus.jsonl"
_MANIFEST_NAME = "manifest.json"


def _paths(path):
    """Resolve (dataset, manifest) paths.  ``path`` may be a directory or
    the dataset file itself; the manifest sits alongside."""
    p = Path(path)
    if p.suffix == ".jsonl":
        return p, p.parent / _MANIFEST_NAME
    return p / _DATASET_NAME, p / _MANIFEST_NAME


def save(corpus, path):
    """Write the corpus as newline-delimited JSON plus a manifest sidecar.

    Numeric values serialize as decimal text that round-trips exactly.
    """
    data_path, man_path = _paths(path)
    data_path.parent.mkdir(parents=True, exist_ok=True)
    with open(data_path, "w") as f:
        for w, split_tag in zip(corpus.windows, corpus.split):
            record = {
                "run_id": w.run_id,
                "device_id": w.device,
                "label": w.label.value,
                "variant": w.variant.value,
                "sample_rate_hz": tracegen.SAMPLE_RATE_HZ,
                "unit": "uA",
                "split": split_tag,
                "offset": w.offset,
                "samples": [float(v) for v in w.samples],
                "perturb_mask": [int(v) for v in w.mask],
            }
            f.write(json.dumps(record, sort_keys=True) + "\n")
    with open(man_path, "w") as f:
        json.dump(corpus.manifest, f, sort_keys=True, indent=2)
        f.write("\n")
    return data_path


_LABELS = {label.value for label in ClassLabel}
_VARIANTS = {v.value for v in VariantKind}


def load(path):
    """Load a corpus saved by :func:`save`; malformed records raise
    FormatError naming the offending line."""
    data_path, man_path = _paths(path)
    if not data_path.exists():
        raise FileNotFoundError(f"no dataset file at {data_path}")

    windows, split = [], []
    with open(data_path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{data_path}:{lineno}: bad JSON ({exc.msg})")
            windows.append(_window_from_record(rec, data_path, lineno))
            split.append(rec["split"])

    manifest = {}
    if man_path.exists():
        with open(man_path) as f:
            try:
                manifest = json.load(f)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{man_path}: bad JSON ({exc.msg})")
    return Corpus(windows, split, manifest)


def _window_from_record(rec, path, lineno):
    def fail(msg):
        raise FormatError(f"{path}:{lineno}: {msg}")

    for key in ("run_id", "device_id", "label", "variant", "sample_rate_hz",
                "unit", "split", "samples", "perturb_mask"):
        if key not in rec:
            fail(f"missing field {key!r}")
    if rec["label"] not in _LABELS:
        fail(f"unknown label {rec['label']!r}")
    if rec["variant"] not in _VARIANTS:
        fail(f"unknown variant {rec['variant']!r}")
    if rec["split"] not in (TRAIN, TEST):
        fail(f"unknown split {rec['split']!r}")
    if rec["sample_rate_hz"] != tracegen.SAMPLE_RATE_HZ:
        fail(f"unsupported sample_rate_hz {rec['sample_rate_hz']!r}")
    samples = rec["samples"]
    mask = rec["perturb_mask"]
    if len(samples) != WINDOW_LEN:
        fail(f"window has {len(samples)} samples, expected {WINDOW_LEN}")
    if len(mask) != WINDOW_LEN:
        fail(f"perturb_mask has {len(mask)} entries, expected {WINDOW_LEN}")
    if any(b not in (0, 1) for b in mask):
        fail("perturb_mask entries must be 0 or 1")
    label = ClassLabel(rec["label"])
    mask_arr = np.asarray(mask, dtype=np.uint8)
    if label is not ClassLabel.MIRAI and mask_arr.any():
        fail("non-mirai window with nonzero perturb_mask")
    return LabeledWindow(
        samples=np.asarray(samples, dtype=np.float64),
        mask=mask_arr,
        label=label,
        variant=VariantKind(rec["variant"]),
        device=rec["device_id"],
        run_id=rec["run_id"],
        offset=rec.get("offset", 0))
