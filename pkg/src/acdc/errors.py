"""Exception hierarchy shared across the engine."""


class AcdcError(Exception):
    """Base class for all engine errors."""


class SchemaMismatch(AcdcError):
    """Tensor names or shapes differ between genomes that must share a schema."""


class DegenerateWeights(AcdcError):
    """Crossover mixing weights sum too close to zero to normalize."""


class NumericalFailure(AcdcError):
    """A matrix decomposition failed to converge."""


class LengthMismatch(AcdcError):
    """A per-task sequence does not match the active task count."""


class EmptySkillVector(AcdcError):
    pass


class EmptyPopulation(AcdcError):
    pass


class EpochMismatch(AcdcError):
    """Skill vectors from different active-task snapshots were compared."""


class ZeroTotalWeight(AcdcError):
    """All difficulty weights are zero; the weighted skill score is undefined."""


class ProviderUnavailable(AcdcError):
    """A provider backend could not serve the request."""


class Unparseable(AcdcError):
    """A provider transcript contained no parseable decision after retries."""


class SandboxFailure(AcdcError):
    """Infrastructure failure while running a sandboxed scorer (not a task failure)."""


class ScorerSandboxFailure(SandboxFailure):
    pass


class DimensionMismatch(AcdcError):
    pass


class UnknownModelId(AcdcError):
    pass


class InsufficientModels(AcdcError):
    pass


class UnknownKind(AcdcError):
    pass


class CorruptSnapshot(AcdcError):
    """Snapshot bytes failed their integrity check."""


class ParseError(AcdcError):
    """A config or manifest file could not be parsed."""


class ValidationError(AcdcError):
    """A config value violates its declared range or invariant."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
