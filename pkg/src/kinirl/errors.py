"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: argument/config errors are usage
problems (1), data/format/planning errors are data problems (2) and numeric
errors are numeric problems (3).
"""


class KinIRLError(Exception):
    exit_code = 2


class ArgumentError(KinIRLError, ValueError):
    exit_code = 1


class ConfigError(KinIRLError, ValueError):
    exit_code = 1


class DataError(KinIRLError, ValueError):
    exit_code = 2


class FormatError(KinIRLError, ValueError):
    exit_code = 2


class PlanningError(KinIRLError, RuntimeError):
    exit_code = 2


class StateError(KinIRLError, RuntimeError):
    exit_code = 2


class NumericError(KinIRLError, ArithmeticError):
    exit_code = 3
