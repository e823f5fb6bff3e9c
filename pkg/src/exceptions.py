# -*- coding: utf-8 -*-
"""Exceptions raised across the package.

The CLI maps these onto exit codes (see ``src.cli``).
"""


class AdmError(Exception):
    """Base class for every error this package raises on purpose."""


class ShapeError(AdmError, ValueError):
    """Operands of an array operation do not conform."""


class NonFiniteError(AdmError, FloatingPointError):
    """An array operation produced (or was fed) inf or NaN."""


class ScenarioError(AdmError):
    """A scenario record is malformed.

    :line: 1-based line number in the source file, when known
    :agent_id: offending agent, when known
    """

    def __init__(self, message, line=None, agent_id=None):
        self.reason = message
        self.line = line
        self.agent_id = agent_id
        prefix = []
        if line is not None:
            prefix.append(f'line {line}')
        if agent_id is not None:
            prefix.append(f'agent {agent_id!r}')
        if prefix:
            message = ', '.join(prefix) + ': ' + message
        super().__init__(message)


class CheckpointError(AdmError):
    """A checkpoint is missing, corrupt or does not match the model."""


class ConfigError(AdmError):
    """A configuration file or override is invalid."""


class InferenceError(AdmError):
    """Inference was asked for something the model cannot do."""
