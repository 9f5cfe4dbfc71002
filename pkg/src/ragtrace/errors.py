"""Exception hierarchy shared across the package."""


class RagTraceError(Exception):
    """Base class for all ragtrace errors."""

    code = "ragtrace_error"


class WeightSumViolation(RagTraceError):
    code = "weight_sum_violation"

    def __init__(self, pair: str, total: float):
        self.pair = pair
        self.total = total
        super().__init__(f"{pair} must sum to 1.0, got {total!r}")


class ThetaOutOfRange(RagTraceError):
    code = "theta_out_of_range"

    def __init__(self, theta: float):
        self.theta = theta
        super().__init__(f"theta must lie strictly between 0 and 1, got {theta!r}")


class EmptyDocument(RagTraceError):
    code = "empty_document"


class DimensionMismatch(RagTraceError):
    code = "dimension_mismatch"


class ZeroNormEmbedding(RagTraceError):
    code = "zero_norm_embedding"


class IoError(RagTraceError):
    code = "io_error"


class FormatVersionMismatch(RagTraceError):
    code = "format_version_mismatch"


class GatewayError(RagTraceError):
    code = "gateway_error"


class GatewayTimeout(GatewayError):
    code = "gateway_timeout"


class ConfidenceUnavailable(GatewayError):
    code = "confidence_unavailable"


class MissingGroundTruth(RagTraceError):
    code = "missing_ground_truth"


class EmptyRetrieval(RagTraceError):
    code = "empty_retrieval"


class TooFewPoints(RagTraceError):
    code = "too_few_points"


class PerplexityTooLarge(RagTraceError):
    code = "perplexity_too_large"


class MissingPriorRecords(RagTraceError):
    code = "missing_prior_records"


class FocusNotFound(RagTraceError):
    code = "focus_not_found"


class NoCommonQuestions(RagTraceError):
    code = "no_common_questions"


class NotFound(RagTraceError):
    code = "not_found"


class StateNotReady(RagTraceError):
    code = "state_not_ready"
