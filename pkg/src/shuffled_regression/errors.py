"""Exception hierarchy.

Every error carries a ``category`` used by the CLI to choose an exit code:
``usage`` (2), ``data`` (3) or ``numerical`` (4).
"""


class ShuffledRegressionError(Exception):
    category = "data"


class DimensionMismatch(ShuffledRegressionError, ValueError):
    pass


class RankDeficient(ShuffledRegressionError, ArithmeticError):
    category = "numerical"


class IndexOutOfRange(ShuffledRegressionError, IndexError):
    pass


class EmptyAccumulator(ShuffledRegressionError, ValueError):
    category = "numerical"


class ConfigError(ShuffledRegressionError, ValueError):
    category = "usage"


class InvalidBounds(ShuffledRegressionError, ValueError):
    pass


class InvalidG(ShuffledRegressionError, ValueError):
    pass


class InvalidAlphabet(ShuffledRegressionError, ValueError):
    pass


class DegenerateLabels(ShuffledRegressionError, ValueError):
    pass


class IngestError(ShuffledRegressionError, ValueError):
    """Malformed input table; the message names the file, row and column."""
