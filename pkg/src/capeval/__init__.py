"""capeval: caption-evaluation toolkit.

Native lexical metrics (BLEU-1..4, ROUGE-L, CIDEr-D, METEOR), rank-correlation
protocols against human ratings, pairwise-preference protocols, and a
forward-selected linear-regression metric ensemble.
"""

from .corpus import (
    CaptionInstance,
    CorrelationKind,
    Dataset,
    DatasetName,
    PairInstance,
    apply_overlap_policy,
    load_dataset,
    save_dataset,
)
from .ensemble import (
    EnsembleConfig,
    EnsembleModel,
    dominant_ensemble,
    fit_ensemble,
    forward_select,
    published_model,
    score_ensemble,
)
from .lexical import bleu_n, build_df, cider_d, meteor, rouge_l, score_dataset
from .scores import MetricDescriptor, ScoreMatrix, ingest_external, join, registry
from .stats import (
    CorrelationReport,
    PairwiseReport,
    correlate,
    kendall_tau_b,
    kendall_tau_c,
    pairwise_accuracy,
    pascal50s_run,
    pearson,
    resolve_pascal_pairs,
)
from .textnorm import ngrams, stem, tokenize

__version__ = "0.1.0"
