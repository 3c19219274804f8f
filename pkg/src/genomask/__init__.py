from genomask.distributions import Alphabet, ExplicitJointModel, HmmModel, MarkovChainModel, SequenceModel
from genomask.enumeration import ERASED
from genomask.hmm import HmmMaskingSession, mask_hmm
from genomask.mechanism import MaskedSequence, Ordering, mask_sequence
from genomask.runner import ExperimentRunner

__all__ = [
    "ERASED",
    "Alphabet",
    "ExperimentRunner",
    "ExplicitJointModel",
    "HmmMaskingSession",
    "HmmModel",
    "MarkovChainModel",
    "MaskedSequence",
    "Ordering",
    "SequenceModel",
    "mask_hmm",
    "mask_sequence",
]
