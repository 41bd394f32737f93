"""Specific emitter identification by sequential voting on bispectrum features."""

__version__ = "0.1.0"

from .bispectrum import (
    BispectrumGrid,
    BispectrumImage,
    apply_colormap,
    bispectrum_fft,
    bispectrum_lag_oracle,
    downsample_power,
    featurize,
    quantize_rescale,
)
from .classifier import (
    Classifier,
    ConfusionVoter,
    ImageSet,
    SoftmaxModel,
    TrainingSettings,
    estimate_confusion,
    train_softmax,
)
from .signals import (
    EmitterProfile,
    IqSignal,
    SubsampleSpec,
    demodulate_iq,
    extract_subsample,
    hilbert_transform,
    synthesize_emitter_signal,
)
from .voting import (
    Decision,
    StoppingConfig,
    VoteTally,
    check_stop,
    decide_sequential,
    favored_certainty,
    preponderance_certainty,
    record_vote,
    reg_incomplete_beta,
)

__all__ = [
    "__version__",
    "BispectrumGrid",
    "BispectrumImage",
    "apply_colormap",
    "bispectrum_fft",
    "bispectrum_lag_oracle",
    "downsample_power",
    "featurize",
    "quantize_rescale",
    "Classifier",
    "ConfusionVoter",
    "ImageSet",
    "SoftmaxModel",
    "TrainingSettings",
    "estimate_confusion",
    "train_softmax",
    "EmitterProfile",
    "IqSignal",
    "SubsampleSpec",
    "demodulate_iq",
    "extract_subsample",
    "hilbert_transform",
    "synthesize_emitter_signal",
    "Decision",
    "StoppingConfig",
    "VoteTally",
    "check_stop",
    "decide_sequential",
    "favored_certainty",
    "preponderance_certainty",
    "record_vote",
    "reg_incomplete_beta",
]
