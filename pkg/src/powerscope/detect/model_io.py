"""Versioned text serialization of trained detectors.

The container is line-oriented: a header (format version, architecture,
class order, config and manifest as canonical JSON), the scaler block,
then named weight tensors with explicit shapes.  Floats are written with
``repr`` so values round-trip exactly and reruns are byte-identical.
"""

import json
from pathlib import Path

import numpy as np

from ..errors import FormatError
from ..features import Scaler
from ..tracegen import CLASS_ORDER
from .nets import ARCH_NAMES
from .training import DetectorConfig, DetectorModel

FORMAT_NAME = "powerscope-model"
FORMAT_VERSION = 1


def _fmt_floats(arr):
    return " ".join(repr(float(v)) for v in np.asarray(arr).reshape(-1))


def save_model(model, path):
    """Write a model to ``path``; see module docstring for the format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{FORMAT_NAME} {FORMAT_VERSION}",
        f"arch {model.arch}",
        "classes " + " ".join(label.value for label in CLASS_ORDER),
        "config " + json.dumps(model.config.to_dict(), sort_keys=True),
        "manifest " + json.dumps(model.manifest, sort_keys=True),
        "scaler.means " + _fmt_floats(model.scaler.means),
        "scaler.stds " + _fmt_floats(model.scaler.stds),
        "scaler.constant " + " ".join(
            str(int(v)) for v in model.scaler.constant),
    ]
    for name in sorted(model.params):
        w = model.params[name]
        shape = " ".join(str(d) for d in w.shape)
        lines.append(f"tensor {name} {shape}")
        lines.append(_fmt_floats(w))
    lines.append("end")
    path.write_text("\n".join(lines) + "\n")
    return path


def _parse_floats(text, expected, where):
    parts = text.split()
    if len(parts) != expected:
        raise FormatError(f"{where}: expected {expected} values, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{where}: bad numeric value ({exc})") from None


def load_model(path):
    """Load a model written by :func:`save_model`; malformed or truncated
    files raise FormatError."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no model file at {path}")
    lines = path.read_text().splitlines()

    def take(i, prefix):
        if i >= len(lines):
            raise FormatError(f"{path}: truncated file (missing {prefix!r})")
        line = lines[i]
        if not line.startswith(prefix + " "):
            raise FormatError(f"{path}:{i + 1}: expected {prefix!r} line")
        return line[len(prefix) + 1:]

    header = lines[0].split() if lines else []
    if len(header) != 2 or header[0] != FORMAT_NAME:
        raise FormatError(f"{path}: not a {FORMAT_NAME} file")
    if header[1] != str(FORMAT_VERSION):
        raise FormatError(f"{path}: unsupported format version {header[1]} "
                          f"(expected {FORMAT_VERSION})")

    arch = take(1, "arch")
    if arch not in ARCH_NAMES:
        raise FormatError(f"{path}: unknown architecture {arch!r}")
    classes = take(2, "classes").split()
    expected_classes = [label.value for label in CLASS_ORDER]
    if classes != expected_classes:
        raise FormatError(f"{path}: class order {classes} does not match "
                          f"{expected_classes}")
    try:
        config = DetectorConfig.from_dict(json.loads(take(3, "config")))
        manifest = json.loads(take(4, "manifest"))
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad config/manifest JSON ({exc})") from None

    n_feat_text = take(5, "scaler.means")
    means = np.array([float(v) for v in n_feat_text.split()])
    n_feat = len(means)
    stds = _parse_floats(take(6, "scaler.stds"), n_feat, f"{path}: scaler.stds")
    const_parts = take(7, "scaler.constant").split()
    if len(const_parts) != n_feat:
        raise FormatError(f"{path}: scaler.constant length mismatch")
    constant = np.array([p == "1" for p in const_parts])
    scaler = Scaler(means, stds, constant)

    params = {}
    i = 8
    ended = False
    while i < len(lines):
        line = lines[i]
        if line == "end":
            ended = True
            break
        parts = line.split()
        if len(parts) < 2 or parts[0] != "tensor":
            raise FormatError(f"{path}:{i + 1}: expected 'tensor' or 'end'")
        name = parts[1]
        try:
            shape = tuple(int(d) for d in parts[2:])
        except ValueError:
            raise FormatError(f"{path}:{i + 1}: bad tensor shape") from None
        if i + 1 >= len(lines):
            raise FormatError(f"{path}: truncated tensor {name!r}")
        size = int(np.prod(shape)) if shape else 1
        values = _parse_floats(lines[i + 1], size, f"{path}: tensor {name}")
        params[name] = values.reshape(shape)
        i += 2
    if not ended:
        raise FormatError(f"{path}: truncated file (no 'end' marker)")
    if not params:
        raise FormatError(f"{path}: model has no weight tensors")

    return DetectorModel(arch, params, scaler, config, manifest)
