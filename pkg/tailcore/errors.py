__all__ = ['TailcoreError',
           'InputError',
           'NumericalToleranceError',
           'GoldenMismatchError',
           'UnverifiedPositivityWarning',
           ]


class TailcoreError(ValueError):
    """Base class for all tailcore errors.

    Every error carries a short machine readable `code` (e.g. 'BLOCK_MISMATCH')
    and optionally a JSON pointer into the input document that caused it.
    """
    default_code = "TAILCORE_ERROR"

    def __init__(self, message, code=None, pointer=None):
        self.code = code if code is not None else self.default_code
        self.pointer = pointer
        if pointer is not None:
            message = f"{message} (at {pointer})"
        super().__init__(f"[{self.code}] {message}")


class InputError(TailcoreError):
    """The input (shape, element, map payload or json document) is invalid."""
    default_code = "SCHEMA"


class NumericalToleranceError(TailcoreError):
    """A tolerance decision could not be made reliably.

    Mathematically these situations cannot occur for a genuine UP map; they
    signal either an ill-conditioned instance or a map that is not actually
    positive.
    """
    default_code = "NUMERICAL_TOLERANCE"


class GoldenMismatchError(TailcoreError):
    """A computed value differs from an embedded golden value."""
    default_code = "GOLDEN_MISMATCH"

    def __init__(self, diffs):
        self.diffs = diffs
        lines = [f"{field}: expected {expected}, got {got}"
                 for field, expected, got in diffs]
        super().__init__("golden values not reproduced:\n" + "\n".join(lines))


class UnverifiedPositivityWarning(UserWarning):
    """Results depend on positivity of a map that was only asserted."""
