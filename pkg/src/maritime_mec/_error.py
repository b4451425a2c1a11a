from typing import Optional


class MaritimeMecError(ValueError):
    """Base error carrying a registry code."""

    def __init__(self, code: str, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.field = field

    def __str__(self):
        return "{}: {}".format(self.code, self.message)


class ConfigError(MaritimeMecError):
    pass


class FeasibilityError(MaritimeMecError):
    pass


class InfeasibleMigrationError(MaritimeMecError):
    pass


class BudgetExceededError(MaritimeMecError):
    pass


class ModelDomainError(MaritimeMecError):
    pass


_ERRORS = {
    # Configuration
    "C0001": "Field `{field}` must be strictly positive, got {value}.",
    "C0002": "Field `{field}` must be non-negative, got {value}.",
    "C0003": "Field `{field}` must lie in [0, 1], got {value}.",
    "C0004": "Field `{field}` has {actual} entries, expected {expected}.",
    "C0005": "Unknown configuration key `{field}`.",
    "C0006": "Field `{field}` must be one of {choices}, got `{value}`.",
    "C0007": "Cannot parse configuration file `{path}`: {reason}",
    "C0008": "Field `{field}` must be at least {minimum}, got {value}.",
    "C0009": "Field `{field}` expects {expected}, got `{value}`.",
    "C0010": "Configuration file `{path}` does not exist.",
    # Feasibility
    "F0101": "MIS {mis} allocates a compute share of {total} (C3 requires <= 1).",
    "F0102": "TU {tu} has compute share {value} outside [0, 1] (C4).",
    "F0103": "TU {tu} has non-binary offloading decision {value} (C5).",
    "F0104": "Subchannel {subchannel} of MIS {mis} is shared by {total} (C6).",
    "F0105": "TU {tu} has non-binary subchannel indicator {value} (C7).",
    "F0106": "TU {tu} migrates {value} tasks, allowed range is [0, {limit}] (C11).",
    "F0107": "Decision covers {actual} TUs, expected {expected}.",
    # Energy
    "E0201": "MIS {mis} migrates {tasks} tasks over a zero-rate backhaul.",
    # Oracle
    "O0301": "Enumeration size {size} exceeds the budget of {budget}.",
    "O0302": "Instance exceeds the small-instance limits: {reason}.",
    # Certification
    "V0401": "TU {tu} offloading decision {actual} differs from the optimum {expected}.",
    "V0402": (
        "Subchannel {subchannel} of MIS {mis} goes to TU {actual}, optimum is TU {expected}."
    ),
    "V0403": "TU {tu} migrates {actual} tasks, optimum is {expected}.",
    "V0404": (
        "MIS {mis} compute objective {actual} exceeds the grid optimum {expected} "
        "by more than {gap}."
    ),
    "V0405": "MIS {mis} compute shares {actual} differ from the square-root rule {expected}.",
    "V0406": "MIS {mis} joint optimum {expected} lies above the scheduled objective {actual}.",
    "V0407": (
        "MIS {mis} scheduled objective {actual} exceeds the joint optimum {expected} "
        "by more than {allowance}."
    ),
    # Model domain
    "D0501": "Distance must be strictly positive, got {value}.",
    "D0502": "Wavelength must be strictly positive, got {value}.",
}

_ERROR_TYPES = {
    "C": ConfigError,
    "F": FeasibilityError,
    "E": InfeasibleMigrationError,
    "O": BudgetExceededError,
    "D": ModelDomainError,
}


def make_error(code: str, message_args: dict = None) -> MaritimeMecError:
    """
    Build the exception registered for `code`.

    Parameters
    ----------
    code : str
        The registry code.
    message_args : dict, optional
        Values substituted into the message template.

    Returns
    -------
    MaritimeMecError
        The exception, not yet raised.
    """
    message = _ERRORS.get(code)
    if message is None:
        raise ValueError(f"Unknown code {code}")

    if message_args is not None:
        message = message.format(**message_args)
    error_type = _ERROR_TYPES.get(code[0], MaritimeMecError)
    field = message_args.get("field") if message_args else None
    return error_type(code, message, field=field)


def format_message(code: str, message_args: dict = None) -> str:
    message = _ERRORS[code]
    return message if message_args is None else message.format(**message_args)
