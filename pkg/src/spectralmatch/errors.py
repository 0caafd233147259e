class InputError(ValueError):
    """Malformed or inconsistent input data (files, grids, descriptor sets)."""


class ConvergenceError(RuntimeError):
    pass


class MatchWarning(UserWarning):
    pass
