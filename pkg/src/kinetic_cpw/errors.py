"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain where a formula is defined."""


class ConfigError(ValueError):
    """Invalid run configuration.  ``path`` is the dotted key path at fault."""

    def __init__(self, message, path=None, errors=None):
        self.path = path
        self.errors = list(errors) if errors else [(path, message)]
        super().__init__(f"{path}: {message}" if path else message)

    @classmethod
    def collect(cls, errors):
        """Merge several field errors; ``path`` is the first offending key."""
        if len(errors) == 1:
            return errors[0]
        pairs = [pair for e in errors for pair in e.errors]
        text = "; ".join(f"{p}: {m}" if p else m for p, m in pairs)
        merged = cls(f"{len(pairs)} errors: {text}", None, pairs)
        merged.path = pairs[0][0]
        return merged


class DataError(ValueError):
    """Malformed or unusable measurement data."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ConvergenceError(RuntimeError):
    """A fit failed to converge.  ``best`` carries the best-so-far result."""

    def __init__(self, message, best=None):
        self.best = best
        super().__init__(message)
