"""Recurrence-imaged change-quantile fault classification for converter-fed
transmission lines, with a conventional distance-relay baseline.

Modules:
    synth      parametric three-phase transient generation and dataset IO
    features   change-quantile and quantile feature extraction
    selection  ReliefF ranking and the forward-selection curve
    imaging    recurrence matrix, GASF, and MTF transforms
    net        multi-scale convolutional classifier and training loop
    semisup    label spreading / propagation / self-training teachers
    relay      Butterworth + phasor + quadrilateral-zone relay baseline
    evalkit    splits, SMOTE, classification metrics
    harness    experiment drivers and the faultwave CLI
"""

from . import evalkit, features, harness, imaging, net, relay, selection, semisup, synth

__version__ = "0.1.0"

__all__ = [
    "evalkit", "features", "harness", "imaging", "net", "relay", "selection",
    "semisup", "synth", "__version__",
]
