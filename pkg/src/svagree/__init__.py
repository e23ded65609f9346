"""Subject-verb number agreement probing toolkit."""

__version__ = "0.1.0"

from .lexicon import (  # noqa: F401
    Lexicon,
    LexiconError,
    NounPair,
    Number,
    VerbPair,
    filter_by_scorer_vocab,
    load_lexicon,
    make_lexicon,
)
from .templates import (  # noqa: F401
    NumberPolicy,
    Slot,
    SlotCategory,
    SlotRole,
    Template,
    TemplateError,
    builtin_template,
    builtin_templates,
    load_templates,
    pos_signature,
)
from .generator import (  # noqa: F401
    Dataset,
    GenerationError,
    Replacement,
    Source,
    Stimulus,
    ablation_sweep,
    generate,
    read_dataset,
    replace_one,
    write_dataset,
)
from .corpus import (  # noqa: F401
    DictionaryIndex,
    MatchRecord,
    build_index,
    harvest,
    scan_corpus,
    scan_tokens,
    tokenize,
)
from .scorers import (  # noqa: F401
    CoinFlipScorer,
    HttpScorer,
    LinearProximityScorer,
    OracleScorer,
    ScoreRequest,
    ScoreResponse,
    Scorer,
    ScorerError,
    StdioScorer,
    UniformScorer,
    make_scorer,
)
from .evaluation import (  # noqa: F401
    EvalError,
    EvalReport,
    evaluate,
    import_ml,
    run_exp1,
    run_exp2,
)


def builtin_scorers() -> dict:
    """The four self-test scorers, keyed by CLI name."""
    return {
        "oracle": OracleScorer,
        "uniform": UniformScorer,
        "coinflip": CoinFlipScorer,
        "linear-proximity": LinearProximityScorer,
    }
