"""Exception types, each mapped to a CLI exit code."""


class GhostSimError(Exception):
    exit_code = 1


class ConfigError(GhostSimError, ValueError):
    """Malformed scenario, unknown mode name, bad generator parameters."""

    exit_code = 2


class PhysicsError(GhostSimError, ValueError):
    """A physically meaningless input, e.g. a transmittance above one."""

    exit_code = 3


class UndefinedModulationError(PhysicsError):
    """W(tau) requested with a zero background rate."""


class ResourceError(GhostSimError, MemoryError):
    exit_code = 4
