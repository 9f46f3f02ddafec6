"""Screen repository records for public development projects.

Keyword and count features feed small decision trees; the package also
ships evaluation baselines, cross-validation, and a human review
workflow with an HTTP service. See the README for the CLI surface.
"""
from .corpus import (ColumnMap, CorpusError, ExclusionReport, FilterConfig,
                     LabeledDataset, MergeReport, ParseError, ProjectRecord,
                     apply_filters, load_dataset, merge_labels, parse_projects,
                     save_dataset, serialize_dataset)
from .evaluate import (ConfusionMatrix, CVReport, EvalError, EvalReport,
                       MisclassReport, RefineConfig, baseline_bottom,
                       baseline_top, confusion, cross_validate, evaluate_tree,
                       misclassification_report, precision_recall)
from .features import (FeatureSchema, FeatureVector, KeywordFeature,
                       SchemaError, default_schema, extract_features,
                       featurize_dataset, load_lexicon, save_lexicon)
from .labels import LabelRecord, LabelStoreError, read_label_records, replay
from .server import ServerError, TriageHandle, serve_triage
from .synth import SynthSpec, generate_synthetic_corpus
from .tree import (Classification, DecisionTree, Leaf, Split, TrainParams,
                   TreeError, TreeFormatError, builtin_tree, classify, grow,
                   load_tree, prune, render_text, save_tree, split_quality,
                   train)
from .triage import (CombinedReport, FlagSet, LeafStats, QueueItem,
                     TriageError, TriageSession, combined_metrics,
                     create_session, leaf_statistics, load_session, partition,
                     record_decision, save_session, select_flag_leaves)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
