class ObdaError(Exception):
    exit_code = 4


class ValidationError(ObdaError, ValueError):
    """Bad input: syntax, signature clashes, out-of-fragment axioms."""
    exit_code = 2


class EnumerationCapError(ObdaError):
    """Expansion-tree enumeration exceeded its cap."""
    exit_code = 3

    def __init__(self, predicate, cap):
        super().__init__(f"expansion enumeration for {predicate} exceeded the cap of {cap} trees")
        self.predicate = predicate
        self.cap = cap


class InternalError(ObdaError):
    exit_code = 4
