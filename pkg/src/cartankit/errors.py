"""Exception types shared across the package."""


class CartanKitError(Exception):
    """Base class for library errors."""


class ValidationError(CartanKitError):
    """Input failed a structural or numerical precondition."""


class NumericalError(CartanKitError):
    """A computation could not be completed to the requested accuracy."""


class ExprSyntaxError(ValidationError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(set(expected)))
        exp = ", ".join(self.expected)
        super().__init__(f"{message} at byte {offset}" + (f" (expected one of: {exp})" if exp else ""))


class UnknownIdentifier(ValidationError):
    def __init__(self, name, offset):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at byte {offset}")


class DomainError(NumericalError):
    def __init__(self, message, subexpression=""):
        self.subexpression = subexpression
        super().__init__(f"{message}: {subexpression}" if subexpression else message)


class SizeMismatch(ValidationError):
    pass


class Overflow(NumericalError):
    pass


class NotClosed(ValidationError):
    pass


class UnknownModel(ValidationError):
    pass


class InvalidModel(ValidationError):
    pass


class SingularCoframe(NumericalError):
    pass


class TooDeep(ValidationError):
    pass


class ObstructionTooLarge(NumericalError):
    pass


class IntegrationEscaped(NumericalError):
    pass


class NotADisguise(ValidationError):
    pass


class NotASubalgebra(ValidationError):
    pass


class NotInvariant(ValidationError):
    pass


class IllDefined(NumericalError):
    pass


class NotTorsionFree(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class DegenerateMetric(ValidationError):
    pass
