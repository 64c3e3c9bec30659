"""powerscope: a desk-scale power side-channel attack/defense simulator.

Synthesizes IoT power consumption traces for three device states,
injects dummy-code perturbations into the malware scanning model, trains
ML detectors over 150-sample windows, and evaluates evasion success,
statistical signatures, feature attributions and two defenses.
"""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
