"""Cookie-theft transcript screening pipeline."""

__version__ = "0.1.0"

from .chat_parser import (
    CleanTranscript,
    TranscriptDocument,
    Utterance,
    extract_participant_text,
    parse_document,
    strip_annotations,
)
from .cue_analyzer import (
    CueFeaturizer,
    CueLexicon,
    CueReport,
    DEFAULT_LEXICON,
    FeatureVector,
    cue_coverage,
    featurize,
    tokenize,
)
from .prompt_compiler import PromptBundle, build_prompt, load_templates
from .corpus import Corpus, ParticipantRecord, SplitPolicy, load_manifest, split
from .baselines import LdaClassifier, LogisticClassifier, Prediction
from .evaluator import ConfusionMatrix, Metrics, confuse, metrics, relative_improvement
from .synth import SynthConfig, generate

__all__ = [
    "CleanTranscript",
    "TranscriptDocument",
    "Utterance",
    "parse_document",
    "strip_annotations",
    "extract_participant_text",
    "CueFeaturizer",
    "CueLexicon",
    "CueReport",
    "DEFAULT_LEXICON",
    "FeatureVector",
    "tokenize",
    "cue_coverage",
    "featurize",
    "PromptBundle",
    "build_prompt",
    "load_templates",
    "Corpus",
    "ParticipantRecord",
    "SplitPolicy",
    "load_manifest",
    "split",
    "LdaClassifier",
    "LogisticClassifier",
    "Prediction",
    "ConfusionMatrix",
    "Metrics",
    "confuse",
    "metrics",
    "relative_improvement",
    "SynthConfig",
    "generate",
]
