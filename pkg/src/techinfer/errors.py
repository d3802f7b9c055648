"""Exception hierarchy shared across the package.

Every error carries a short machine-readable ``code`` so the CLI and the
HTTP service can report failures uniformly.
"""


class TechInferError(Exception):
    """Base class for data and modeling errors raised by techinfer."""

    code = "error"


class MalformedRecordError(TechInferError):
    code = "malformed-record"


class InvalidTechniqueIdError(TechInferError):
    code = "invalid-technique-id"


class EmptyInputError(TechInferError):
    code = "empty-input"


class InfeasibleSplitError(TechInferError):
    code = "infeasible-split"


class SingularSystemError(TechInferError):
    code = "singular-system"


class NoTriplesError(TechInferError):
    code = "no-valid-triples"


class NoEvaluableEntitiesError(TechInferError):
    code = "no-evaluable-entities"


class PerplexityInfeasibleError(TechInferError):
    code = "perplexity-infeasible"


class EmptyObservationError(TechInferError):
    code = "empty-observation"


class InvalidRequestError(TechInferError):
    code = "invalid-request"


class ModelFormatError(TechInferError):
    code = "model-format"
