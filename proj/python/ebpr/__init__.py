from ._ebpr import (
    ConfigError,
    DataError,
    Explainability,
    FactorModel,
    InteractionDataset,
    LooSplit,
    LossKind,
    NumericError,
    TrainingConfig,
    TrainingResult,
    __version__,
    average_explainability,
    cosine_item_similarity,
    estimate_item_propensity,
    evaluate,
    explainability,
    from_pairs,
    load_dataset,
    loo_split,
    merge_validation,
    oracle,
    parse_loss_kind,
    run_command,
    run_replicates,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
