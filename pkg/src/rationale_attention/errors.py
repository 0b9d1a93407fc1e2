"""Exception types shared across the package."""


class SchemaError(ValueError):
    """A corpus record does not satisfy the instance schema."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = []
        if line is not None:
            where.append(f"line {line}")
        if path:
            where.append(path)
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class TokenizerError(RuntimeError):
    pass


class EmptyRationale(ValueError):
    """Raised when a rationale mask has no positive entries."""


class ShapeError(ValueError):
    pass


class ConfigError(ValueError):
    pass


class BackendError(RuntimeError):
    pass


class NoAttention(RuntimeError):
    """The model kind does not expose a token attention distribution."""


class NonFiniteLoss(FloatingPointError):
    def __init__(self, batch_id, value):
        self.batch_id = batch_id
        self.value = value
        super().__init__(f"non-finite loss {value!r} at batch {batch_id}")


class EmptyInput(ValueError):
    pass


class MissingErasedProbs(ValueError):
    pass


class MissingRationaleProbs(ValueError):
    pass


class DegeneratePool(ValueError):
    pass


class MissingSlot(KeyError):
    pass


class ClientError(RuntimeError):
    pass
