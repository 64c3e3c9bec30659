"""Generative models of IoT device power consumption.

Three operational states are synthesized as microampere current traces
sampled at 1 kHz:

* idle        -- flat baseline plus Gaussian sensor noise
* iot_service -- baseline plus Poisson-arrival rectangular bursts
* mirai       -- baseline plus a periodic high-amplitude spike train
                 (the scanning phase), optionally perturbed by one of
                 four dummy-code variants

Dummy-code variants stretch the scan period (modeling execution
overhead) and add variant-specific extra consumption.  Each perturbed
run carries a ground-truth ``perturb_mask`` marking exactly the samples
whose value differs from the unperturbed run generated with the same
seed, so downstream statistics can align perturbation activity with the
power signal.

All generators are pure functions of their inputs plus an explicit
``numpy.random.Generator``; identical inputs and seed give bit-identical
output.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import AnalysisError, ParameterError
from .features import acf

SAMPLE_RATE_HZ = 1000
WINDOW_LEN = 150


class ClassLabel(Enum):
    """Device operational state; the order below fixes confusion-matrix
    and probability-vector indexing everywhere."""

    IDLE = "idle"
    IOT_SERVICE = "iot_service"
    MIRAI = "mirai"

    @property
    def index(self):
        return CLASS_ORDER.index(self)

    @classmethod
    def from_tag(cls, tag):
        try:
            return cls(tag)
        except ValueError:
            raise ParameterError(f"unknown class label {tag!r}") from None


CLASS_ORDER = (ClassLabel.IDLE, ClassLabel.IOT_SERVICE, ClassLabel.MIRAI)


class VariantKind(Enum):
    """Dummy-code variant injected into the scanning phase."""

    NONE = "none"
    SINGLE_FUNCTION = "single_function"
    ONE_FOR_LOOP = "one_for_loop"
    TWO_NESTED_LOOPS = "two_nested_loops"
    IF_STATEMENT = "if_statement"

    @classmethod
    def from_tag(cls, tag):
        try:
            return cls(tag)
        except ValueError:
            raise ParameterError(f"unknown variant {tag!r}") from None


ATTACK_VARIANTS = (
    VariantKind.SINGLE_FUNCTION,
    VariantKind.ONE_FOR_LOOP,
    VariantKind.TWO_NESTED_LOOPS,
    VariantKind.IF_STATEMENT,
)


@dataclass(frozen=True)
class DeviceProfile:
    """Per-device parameters: idle current, sensor noise, and a scale
    factor applied to every event amplitude (hardware heterogeneity)."""

    id: str
    baseline_uA: float
    noise_sigma_uA: float
    amp_scale: float = 1.0

    def __post_init__(self):
        if self.baseline_uA < 0:
            raise ParameterError("baseline_uA must be >= 0")
        if self.noise_sigma_uA <= 0:
            raise ParameterError("noise_sigma_uA must be > 0")
        if self.amp_scale <= 0:
            raise ParameterError("amp_scale must be > 0")


@dataclass(frozen=True)
class ScanModel:
    """Shape of the scanning-phase spike train."""

    period_samples: int = 20
    spike_amp_uA: float = 40_000.0
    spike_width_samples: int = 8
    jitter_sigma: float = 0.5

    def __post_init__(self):
        if self.period_samples < 1:
            raise ParameterError("period_samples must be a positive integer")
        if self.spike_amp_uA <= 0:
            raise ParameterError("spike_amp_uA must be > 0")
        if not 0 < self.spike_width_samples < self.period_samples:
            raise ParameterError("spike_width_samples must be in (0, period_samples)")
        if self.jitter_sigma < 0 or self.jitter_sigma >= self.period_samples / 4:
            raise ParameterError("jitter_sigma must be in [0, period_samples/4)")


@dataclass(frozen=True)
class PerturbationSpec:
    """Parameterization of one dummy-code variant's amplitude and timing
    effects on the scan model."""

    kind: VariantKind = VariantKind.NONE
    extra_amp_uA: float = 0.0
    extra_amp_spread: float = 0.0
    timing_stretch: float = 1.0
    branch_prob: float = 0.0
    ripple_amp_uA: float = 0.0

    def __post_init__(self):
        if self.extra_amp_uA < 0:
            raise ParameterError("extra_amp_uA must be >= 0")
        if not 0.0 <= self.extra_amp_spread <= 1.0:
            raise ParameterError("extra_amp_spread must be in [0, 1]")
        if self.timing_stretch < 1.0:
            raise ParameterError("timing_stretch must be >= 1")
        if not 0.0 <= self.branch_prob <= 1.0:
            raise ParameterError("branch_prob must be in [0, 1]")
        if self.ripple_amp_uA < 0:
            raise ParameterError("ripple_amp_uA must be >= 0")
        if self.kind is VariantKind.NONE:
            if (self.extra_amp_uA != 0 or self.extra_amp_spread != 0
                    or self.timing_stretch != 1.0 or self.branch_prob != 0
                    or self.ripple_amp_uA != 0):
                raise ParameterError("kind=none requires all effect fields zero "
                                     "and timing_stretch=1")


@dataclass
class PowerRun:
    """One simulated execution: a current trace plus ground truth.

    ``perturb_mask[t] = 1`` exactly where the dummy-code variant changed
    the value of ``samples[t]`` relative to the unperturbed run generated
    from the same seed.  ``scan_events`` lists the start index of every
    scan spike (empty for benign runs); it is generator ground truth, not
    part of the on-disk dataset schema.
    """

    samples: np.ndarray
    perturb_mask: np.ndarray
    label: ClassLabel
    variant: VariantKind
    device: str
    sample_rate_hz: int = SAMPLE_RATE_HZ
    run_id: str = ""
    scan_events: list = field(default_factory=list)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.perturb_mask = np.asarray(self.perturb_mask, dtype=np.uint8)
        if self.samples.ndim != 1:
            raise ParameterError("samples must be one-dimensional")
        if self.perturb_mask.shape != self.samples.shape:
            raise ParameterError("perturb_mask must have the same length as samples")
        if self.sample_rate_hz != SAMPLE_RATE_HZ:
            raise ParameterError(f"sample_rate_hz must be {SAMPLE_RATE_HZ}")
        if self.label is not ClassLabel.MIRAI and self.perturb_mask.any():
            raise ParameterError("non-mirai runs must have an all-zero perturb_mask")

    @property
    def elapsed_samples(self):
        return len(self.samples)


# ---------------------------------------------------------------------------
# Default calibration.  The constants below define the "default" synthetic
# device; downstream defaults (detectors, attack evaluation, statistics)
# assume them.

DEFAULT_PROFILE = DeviceProfile("dev-c", 120_000.0, 2_000.0, 1.0)

#: Five built-in devices spanning +-20% baseline, +-50% noise and
#: amp_scale in [0.8, 1.2].
BUILTIN_PROFILES = (
    DeviceProfile("dev-a", 96_000.0, 1_000.0, 0.80),
    DeviceProfile("dev-b", 108_000.0, 1_500.0, 0.90),
    DEFAULT_PROFILE,
    DeviceProfile("dev-d", 132_000.0, 2_500.0, 1.10),
    DeviceProfile("dev-e", 144_000.0, 3_000.0, 1.20),
)

DEFAULT_SCAN = ScanModel()

#: Default iot_service burst parameters (rate in Hz, amplitude in uA,
#: mean duration in samples).
DEFAULT_BURST_RATE_HZ = 60.0
DEFAULT_BURST_AMP_UA = 36_000.0
DEFAULT_BURST_MEAN_DUR = 4

#: Width of variant extra spikes (samples).
EXTRA_SPIKE_WIDTH = 3

#: Relative inflation of jitter variance per variant kind (the
#: ``1 + inflation`` factor multiplying jitter_sigma**2).
JITTER_INFLATION = {
    VariantKind.NONE: 0.0,
    VariantKind.SINGLE_FUNCTION: 0.25,
    VariantKind.ONE_FOR_LOOP: 0.5,
    VariantKind.TWO_NESTED_LOOPS: 1.5,
    VariantKind.IF_STATEMENT: 0.75,
}

DEFAULT_SPECS = {
    VariantKind.NONE: PerturbationSpec(VariantKind.NONE),
    VariantKind.SINGLE_FUNCTION: PerturbationSpec(
        VariantKind.SINGLE_FUNCTION, ripple_amp_uA=4_000.0, timing_stretch=1.05),
    VariantKind.ONE_FOR_LOOP: PerturbationSpec(
        VariantKind.ONE_FOR_LOOP, extra_amp_uA=15_000.0, timing_stretch=1.3),
    VariantKind.TWO_NESTED_LOOPS: PerturbationSpec(
        VariantKind.TWO_NESTED_LOOPS, extra_amp_uA=30_000.0,
        extra_amp_spread=0.5, timing_stretch=1.8),
    VariantKind.IF_STATEMENT: PerturbationSpec(
        VariantKind.IF_STATEMENT, extra_amp_uA=8_000.0, branch_prob=0.4,
        timing_stretch=1.1),
}


def default_spec(kind):
    """Default-calibrated PerturbationSpec for ``kind``."""
    return DEFAULT_SPECS[VariantKind(kind) if not isinstance(kind, VariantKind) else kind]


# ---------------------------------------------------------------------------
# Synthesis


def _check_length(n_samples):
    if n_samples < WINDOW_LEN:
        raise ParameterError(
            f"n_samples must be >= {WINDOW_LEN} (one detector window), got {n_samples}")


def synth_idle(profile, n_samples, rng):
    """Idle-state run: baseline current plus Gaussian noise."""
    _check_length(n_samples)
    samples = profile.baseline_uA + rng.normal(0.0, profile.noise_sigma_uA, n_samples)
    return PowerRun(samples, np.zeros(n_samples, dtype=np.uint8),
                    ClassLabel.IDLE, VariantKind.NONE, profile.id)


def synth_service(profile, n_samples, rng,
                  burst_rate_hz=DEFAULT_BURST_RATE_HZ,
                  burst_amp_uA=DEFAULT_BURST_AMP_UA,
                  burst_mean_dur_samples=DEFAULT_BURST_MEAN_DUR):
    """IoT-service run: idle base plus Poisson-arrival rectangular bursts.

    Burst starts follow a Poisson process of rate ``burst_rate_hz``;
    durations are exponential with the given mean (rounded up to >= 1
    sample); burst amplitude is ``burst_amp_uA * profile.amp_scale``.
    Overlapping bursts stack additively.
    """
    _check_length(n_samples)
    if burst_rate_hz <= 0:
        raise ParameterError("burst_rate_hz must be > 0")
    if burst_amp_uA <= 0:
        raise ParameterError("burst_amp_uA must be > 0")
    if burst_mean_dur_samples < 1:
        raise ParameterError("burst_mean_dur_samples must be a positive integer")

    noise_rng, burst_rng = rng.spawn(2)
    samples = profile.baseline_uA + noise_rng.normal(
        0.0, profile.noise_sigma_uA, n_samples)

    n_bursts = burst_rng.poisson(burst_rate_hz * n_samples / SAMPLE_RATE_HZ)
    if n_bursts > 0:
        starts = np.sort(burst_rng.integers(0, n_samples, size=n_bursts))
        durs = np.maximum(
            1, np.ceil(burst_rng.exponential(burst_mean_dur_samples,
                                             size=n_bursts)).astype(np.int64))
        amp = burst_amp_uA * profile.amp_scale
        for s, d in zip(starts, durs):
            samples[s:min(s + d, n_samples)] += amp

    return PowerRun(samples, np.zeros(n_samples, dtype=np.uint8),
                    ClassLabel.IOT_SERVICE, VariantKind.NONE, profile.id)


def _spike_train(n_samples, period, width, amp, jitter_offsets):
    """Additive spike train with events at ``round(k*period + jitter_k)``.

    Returns (signal, event_starts).  Events falling entirely outside the
    trace are dropped.
    """
    signal = np.zeros(n_samples)
    events = []
    k_max = int(math.ceil(n_samples / period)) + 1
    for k in range(k_max):
        start = int(round(k * period + jitter_offsets[k]))
        if start >= n_samples:
            break
        if start + width <= 0:
            continue
        lo, hi = max(start, 0), min(start + width, n_samples)
        signal[lo:hi] += amp
        events.append(start)
    return signal, events


def _variant_effects(spec, scan, profile, n_samples, period_v, events, rng):
    """Additive consumption of the dummy code itself, per variant kind."""
    effect = np.zeros(n_samples)
    amp_scale = profile.amp_scale
    w = EXTRA_SPIKE_WIDTH

    if spec.kind is VariantKind.SINGLE_FUNCTION:
        # Smooth positive half-sine bump over each scan-active window.
        bump = spec.ripple_amp_uA * amp_scale * np.sin(
            np.pi * (np.arange(scan.spike_width_samples) + 0.5)
            / scan.spike_width_samples)
        for start in events:
            lo, hi = max(start, 0), min(start + scan.spike_width_samples, n_samples)
            effect[lo:hi] += bump[lo - start:hi - start]

    elif spec.kind is VariantKind.ONE_FOR_LOOP:
        # One extra mid-period spike per scan event.
        amp = spec.extra_amp_uA * amp_scale
        for start in events:
            q = start + period_v // 2
            if q >= n_samples:
                continue
            effect[q:min(q + w, n_samples)] += amp

    elif spec.kind is VariantKind.TWO_NESTED_LOOPS:
        # 2-4 extra spikes per period at random in-period positions, with
        # randomized amplitudes in extra_amp * [1-spread, 1+spread].
        counts = rng.integers(2, 5, size=len(events))
        hi_off = max(period_v - w, scan.spike_width_samples + 1)
        for start, cnt in zip(events, counts):
            offs = rng.integers(scan.spike_width_samples, hi_off, size=cnt)
            amps = spec.extra_amp_uA * amp_scale * rng.uniform(
                1.0 - spec.extra_amp_spread, 1.0 + spec.extra_amp_spread, size=cnt)
            for off, amp in zip(offs, amps):
                q = start + int(off)
                if q >= n_samples:
                    continue
                effect[q:min(q + w, n_samples)] += amp

    elif spec.kind is VariantKind.IF_STATEMENT:
        # Each period independently adds one mild spike with probability
        # branch_prob, at a random in-period position.  Both vectors are
        # drawn for every period so the stream layout does not depend on
        # which branches fire.
        hits = rng.random(len(events)) < spec.branch_prob
        hi_off = max(period_v - w, scan.spike_width_samples + 1)
        offs = rng.integers(scan.spike_width_samples, hi_off, size=len(events))
        amp = spec.extra_amp_uA * amp_scale
        for start, hit, off in zip(events, hits, offs):
            if not hit:
                continue
            q = start + int(off)
            if q >= n_samples:
                continue
            effect[q:min(q + w, n_samples)] += amp

    return effect


def synth_mirai(profile, n_samples, rng, scan=DEFAULT_SCAN,
                spec=DEFAULT_SPECS[VariantKind.NONE]):
    """Mirai-scanning run, optionally perturbed by a dummy-code variant.

    The unperturbed scan is a spike train with events at ``k * period``
    (plus jitter).  A variant stretches the period to
    ``round(period * timing_stretch)``, inflates jitter, and adds its own
    consumption.  The returned ``perturb_mask`` marks exactly the samples
    whose value differs from the kind=none run generated from the same
    seed (timing displacement counts as a modification).
    """
    _check_length(n_samples)

    noise_rng, jitter_rng, variant_rng = rng.spawn(3)
    base = profile.baseline_uA + noise_rng.normal(
        0.0, profile.noise_sigma_uA, n_samples)
    amp = scan.spike_amp_uA * profile.amp_scale

    # One shared pool of unit jitter draws keeps the clean and perturbed
    # event grids seed-aligned regardless of stretch.
    k_pool = int(math.ceil(n_samples / scan.period_samples)) + 2
    jitter_units = jitter_rng.standard_normal(k_pool)

    clean_train, clean_events = _spike_train(
        n_samples, float(scan.period_samples), scan.spike_width_samples, amp,
        jitter_units * scan.jitter_sigma)

    if spec.kind is VariantKind.NONE:
        samples = base + clean_train
        mask = np.zeros(n_samples, dtype=np.uint8)
        return PowerRun(samples, mask, ClassLabel.MIRAI, VariantKind.NONE,
                        profile.id, scan_events=clean_events)

    period_v = int(round(scan.period_samples * spec.timing_stretch))
    jitter_sigma_v = scan.jitter_sigma * math.sqrt(
        1.0 + JITTER_INFLATION[spec.kind])
    train_v, events_v = _spike_train(
        n_samples, float(period_v), scan.spike_width_samples, amp,
        jitter_units * jitter_sigma_v)
    effect = _variant_effects(spec, scan, profile, n_samples, period_v,
                              events_v, variant_rng)

    samples = base + train_v + effect
    mask = ((train_v + effect) != clean_train).astype(np.uint8)
    return PowerRun(samples, mask, ClassLabel.MIRAI, spec.kind,
                    profile.id, scan_events=events_v)


def synth_run(label, profile, n_samples, rng, scan=DEFAULT_SCAN,
              spec=DEFAULT_SPECS[VariantKind.NONE],
              burst_rate_hz=DEFAULT_BURST_RATE_HZ,
              burst_amp_uA=DEFAULT_BURST_AMP_UA,
              burst_mean_dur_samples=DEFAULT_BURST_MEAN_DUR):
    """Dispatch on class label; Mirai honours ``spec``, benign labels ignore it."""
    if label is ClassLabel.IDLE:
        return synth_idle(profile, n_samples, rng)
    if label is ClassLabel.IOT_SERVICE:
        return synth_service(profile, n_samples, rng, burst_rate_hz,
                             burst_amp_uA, burst_mean_dur_samples)
    if label is ClassLabel.MIRAI:
        return synth_mirai(profile, n_samples, rng, scan, spec)
    raise ParameterError(f"unknown class label {label!r}")


# ---------------------------------------------------------------------------
# Elapsed-time overhead


def dominant_period(samples, max_lag=None, min_peak=0.15):
    """Dominant periodicity of a trace, as the highest-ACF local maximum.

    Raises AnalysisError when no local maximum reaches ``min_peak``
    (aperiodic trace) or the trace has no variance.
    """
    x = np.asarray(samples, dtype=np.float64)
    if max_lag is None:
        max_lag = min(len(x) // 3, 200)
    if max_lag < 3:
        raise ParameterError("trace too short for periodicity analysis")
    r = np.asarray(acf(x, max_lag))
    inner = r[1:-1]
    is_peak = (inner > r[:-2]) & (inner >= r[2:])
    lags = np.nonzero(is_peak)[0] + 1
    lags = lags[lags >= 2]
    if len(lags) == 0 or r[lags].max() < min_peak:
        raise AnalysisError("no detectable periodicity (no ACF peak >= "
                            f"{min_peak})")
    return int(lags[np.argmax(r[lags])])


def overhead_of(run_original, run_modified):
    """Elapsed-time ratio of a modified run over the original, estimated
    as the ratio of dominant ACF lags."""
    p_orig = dominant_period(run_original.samples)
    p_mod = dominant_period(run_modified.samples)
    return p_mod / p_orig
