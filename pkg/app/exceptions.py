# -*- coding: utf-8 -*-

"""
Exceptions raised by the simulation, learning and experiment modules. The CLI
catches `NormadError` at its boundary, logs it and exits with a nonzero status.
"""


class NormadError(Exception):
    pass


class ConfigurationError(NormadError):
    """
    A parameter or configuration value is invalid. `field` names the offending
    parameter so the diagnostic can point at it.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DimensionError(NormadError, ValueError):
    pass


class CheckpointError(NormadError):
    pass
