# qcloud-lab/errors.py - Error Hierarchy

"""Exceptions raised by the lab.

Library code raises; the command layer logs the message and exits with
``exit_code``.
"""


class LabError(Exception):
    """Base class for every error the lab raises on purpose."""

    exit_code = 1


class ConfigError(LabError):
    """Malformed or invalid experiment configuration."""

    exit_code = 2

    def __init__(self, message, field=None, line=None, column=None):
        self.field = field
        self.line = line
        self.column = column
        context = []
        if field:
            context.append(f"field '{field}'")
        if line is not None:
            context.append(f"line {line}, column {column}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)


class MissingArtifactError(LabError):
    """A file that a command depends on does not exist."""

    exit_code = 3


class ValidationError(LabError):
    """Input data violates a model invariant."""

    exit_code = 4


class FleetParseError(ValidationError):
    """Fleet file is not valid JSON or not shaped like a fleet."""


class FleetValidationError(ValidationError):
    """A machine in a fleet violates an invariant."""

    def __init__(self, machine_id, field, message):
        self.machine_id = machine_id
        self.field = field
        super().__init__(f"machine '{machine_id}', field '{field}': {message}")


class OutOfRangeError(ValidationError):
    """Timestamp outside the modelled calibration horizon."""


class MixedPeriodError(ValidationError):
    """Machines with different calibration periods cannot be staggered together."""


class CircuitError(ValidationError):
    """Invalid circuit, gate or benchmark request."""


class CapacityError(ValidationError):
    """Circuit is wider than the target machine."""


class NoFeasibleMachineError(ValidationError):
    """No machine in the fleet can hold the job."""


class DimensionMismatchError(ValidationError):
    """Feature vector length does not match the model."""


class ZeroVarianceError(ValidationError):
    """Pearson correlation is undefined for a constant series."""


class InsufficientSamplesError(ValidationError):
    """Too few samples to fit a model."""


class SchemaMismatchError(ValidationError):
    """A metrics file does not carry the expected schema."""


class ScenarioError(ValidationError):
    """Simulation scenario is invalid or runs past the fleet horizon."""
