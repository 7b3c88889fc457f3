"""Document-VQA spatial grounding toolkit."""

from .errors import (
    ConfigError,
    CorpusFormatError,
    DataError,
    DocgroundError,
    ReplayMissError,
    TrainingError,
    TransportError,
    ValidationError,
)
from .geometry import NormBox, PromptBox, from_prompt_box, iou, mean_iou, to_prompt_box
from .text_metrics import AnlsConfig, anls_corpus, anls_single, levenshtein, normalize_text
from .dataset import (
    Corpus,
    DocumentRecord,
    OcrToken,
    PageInfo,
    QaRecord,
    filter_single_box,
    load_corpus,
    save_corpus,
    split,
)
from .prompting import PromptSpec, build_prompt
from .parsing import Prediction, parse_prediction
from .locator import MatchResult, locate, reading_order
from .client import ModelEndpoint, RetryPolicy, Transcript, TranscriptStore, VlmClient, replay_query
from .formats import EmbeddingFile, EmbeddingRecord, read_embeddings, write_embeddings
from .regressor import (
    Checkpoint,
    RegressorParams,
    TrainConfig,
    forward,
    huber_loss,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from .harness import ReportRow, RunConfig, render_report, run_eval, write_reports

__version__ = "0.1.0"
