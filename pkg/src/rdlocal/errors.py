"""Exception hierarchy.

The CLI maps these onto exit codes: configuration problems exit with 2,
data problems with 3 and inference degeneracies with 4.
"""


class RDError(Exception):
    exit_code = 1


class ConfigError(RDError):
    exit_code = 2


class DataError(RDError):
    exit_code = 3


class SchemaError(DataError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ValidationError(DataError):
    pass


class DegenerateError(RDError):
    exit_code = 4


class EmptySideError(DegenerateError):
    pass


class RankDeficiencyError(DegenerateError):
    pass


class NumericalDegeneracyError(DegenerateError):
    pass


class PlanError(ConfigError):
    pass


class RenderError(RDError):
    exit_code = 3
