"""Exception hierarchy for apl-survival."""


class AplError(Exception):
    """Base class for every error raised by apl-survival."""


class DimensionError(AplError, ValueError):
    """Tensor or array shapes do not agree."""


class EmptyInputError(AplError, ValueError):
    """An operation received zero rows/tokens where at least one is required."""


class NonFiniteError(AplError, ValueError):
    """An input that must hold real numbers contains NaN or infinity."""


class CohortError(AplError):
    """Cohort files are missing, inconsistent or malformed."""


class EmbeddingFormatError(CohortError):
    """A patch-embedding file has a bad header or size."""


class DiscretizationError(AplError):
    """Survival times cannot be split into the requested number of bins."""


class FoldError(AplError):
    """Cross-validation folds cannot be built."""


class GeneratorError(AplError):
    """Synthetic cohort parameters are unsatisfiable."""


class CheckpointError(AplError):
    """A checkpoint file is malformed or does not match its config."""


class ConfigError(AplError):
    """A run configuration is invalid."""


class GradCheckError(AplError):
    """Finite-difference gradient checking could not be performed."""


class TrainingDivergedError(AplError):
    """A non-finite loss was produced during training."""

    def __init__(self, epoch: int, batch: int, case_id: str, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.case_id = case_id
        self.loss = loss
        super().__init__(
            f"Non-finite loss {loss!r} at epoch {epoch}, batch {batch}, case {case_id}"
        )
