"""divlens: corpus-divergence analytics for community language.

Finds the vocabulary that sets a community apart from a platform
baseline (Jensen-Shannon divergence contributions, plus an L1-penalized
multinomial fit as an independent route), then measures how user cohorts
change their activity and use of that vocabulary across an intervention
such as a community ban.
"""

__version__ = "0.1.0"

from .corpus import FrequencyTable, TokenizerConfig, build_table, merge, remove_top_k, tokenize
from .divergence import VocabularyList, WordContribution, jsd_contributions, top_k_ingroup
from .ingest import ArchiveClient, Comment, TimeWindow, decode_base36, encode_base36, sample_id_range
from .shift import ShiftRecord, UserWindowStats, normalized_shift
from .stats import bh_fdr, wilcoxon_rank_sum, wilcoxon_signed_rank

__all__ = [
    "ArchiveClient",
    "Comment",
    "FrequencyTable",
    "ShiftRecord",
    "TimeWindow",
    "TokenizerConfig",
    "UserWindowStats",
    "VocabularyList",
    "WordContribution",
    "__version__",
    "bh_fdr",
    "build_table",
    "decode_base36",
    "encode_base36",
    "jsd_contributions",
    "merge",
    "normalized_shift",
    "remove_top_k",
    "sample_id_range",
    "tokenize",
    "top_k_ingroup",
    "wilcoxon_rank_sum",
    "wilcoxon_signed_rank",
]
