"""Mental-health text classification experiments: zero-shot LLM labeling
versus supervised classifiers on embedding and psycholinguistic features."""

__version__ = "0.1.0"

from .corpus import (
    UNPARSEABLE,
    ColumnSchema,
    LabeledExample,
    Post,
    SplitCorpus,
    TaskKind,
    assemble_task,
    dedupe,
    length_filter,
    load_dataset,
    map_labels,
    split,
)
from .embeddings import (
    EmbeddingProviderConfig,
    EmbeddingService,
    make_embedder,
    stub_embed,
)
from .evaluation import (
    ConfusionMatrix,
    MetricsReport,
    confusion,
    metrics,
    normalize_confusion,
    per_class_f1_table,
)
from .lexicon import (
    Lexicon,
    Standardizer,
    apply_standardizer,
    default_lexicon_path,
    extract_features,
    fit_standardizer,
    load_lexicon,
    parse_lexicon,
    tokenize,
)
from .llm import (
    ChatProviderConfig,
    ChatService,
    LlmOutcome,
    MockChatProvider,
    build_summary_prompt,
    build_zero_shot_prompt,
    classify_zero_shot,
    make_chat_provider,
    parse_label,
    summarize,
)
from .models import (
    FeatureMatrix,
    ForestModel,
    LinearModel,
    TrainConfig,
    concat_features,
    model_from_json,
    model_to_json,
    predict,
    train_linear_svm,
    train_logreg,
    train_random_forest,
)
from .pipeline import (
    RunConfig,
    RunSummary,
    compare_models,
    config_from_dict,
    derive_seed,
    emit_report,
    load_config,
    run_experiment,
)
