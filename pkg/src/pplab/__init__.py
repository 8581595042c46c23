"""Paired-perplexity analysis of picture-description transcripts.

Twin LSTM language models (control / dementia), perplexity-difference
scoring under participant-level leave-one-out cross-validation, model
interpolation, frequency-band perturbation, and lexical-frequency
statistics.
"""
from .chat import (EOS_TOKEN, UNK_TOKEN, ChatParseError, PreprocessConfig,
                   RawTranscript, TokenSequence, parse_chat, preprocess)
from .checkpoint import (CheckpointError, load_checkpoint,
                         load_checkpoint_file, save_checkpoint,
                         save_checkpoint_file)
from .corpus import (Corpus, CorpusError, ParticipantRecord, Vocabulary,
                     build_vocab, load_chat_dir, read_jsonl, split_loocv,
                     write_jsonl)
from .embeddings import EmbeddingError, EmbeddingTable, load_embeddings
from .gradcheck import gradient_check
from .interrogate import (ALL_BANDS, BAND_LABELS, FrequencyBand,
                          InterrogationError, PerturbationCurve,
                          SubstitutionTable, average_curves,
                          generate_variants, interpolate, interrogate,
                          load_substitution_csv)
from .lexstats import (FrequencyLexicon, LexStatsError, RegressionResult,
                       WordlistTagger, mean_log_lexical_frequency, ols_fit,
                       regression_dataset, spearman, t_two_sided_p)
from .loocv import (EvaluationError, EvaluationReport, PairedScore,
                    RunConfig, run_loocv, screening_subset,
                    severity_perplexity_summary)
from .metrics import MetricsError, acc_eer, auc, confidence_interval
from .model import (LMConfig, LMParameters, LMState, ModelError, forward,
                    init_params)
from .training import TrainingError, TrainReport, perplexity, train

__version__ = "0.1.0"
