"""
Typed failures raised by the simulator services
"""


class SimulatorError(Exception):
    """Base class for every failure raised by the simulator"""


class ConfigError(SimulatorError):
    """Invalid scenario, sweep or protocol configuration

    Carries a list of ``(field, message)`` pairs so callers can report every
    offending field at once.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [('', errors)]
        self.errors = list(errors)
        super().__init__('; '.join(
            f'{field}: {message}' if field else message
            for field, message in self.errors
        ))


class TrajectoryError(SimulatorError):
    """Trajectory violates its endpoint or positivity invariants"""


class LostMinimumError(SimulatorError):
    """Lattice well tracking lost the minimum it was following"""


class StiffnessError(SimulatorError):
    """Adaptive integrator could not shrink its step any further"""


class ChannelError(SimulatorError):
    """Gate channel data is missing or inconsistent"""


class TransitionError(SimulatorError):
    """Laser pulse addresses a level the atom does not carry"""


class EmitError(SimulatorError):
    """Results could not be written"""

    def __init__(self, path, reason):
        self.path = path
        super().__init__(f'{path}: {reason}')
