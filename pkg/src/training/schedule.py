from dataclasses import dataclass

from src.utils.errors import ConfigError


@dataclass
class TemperatureSchedule:
    """Exponential schedule f(n) = tau_tar ** (n / N), clamped to n in [0, N]."""

    tau_tar: float
    N: int
    n: int = 0
    # accumulated offset of the persistent-offset variant; stays 0 when stateless
    shift: int = 0

    def __post_init__(self):
        if self.tau_tar < 1:
            raise ConfigError(f"tau_tar must be >= 1, got {self.tau_tar}")
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")

    def at(self, position):
        position = min(max(position, 0), self.N)
        return float(self.tau_tar ** (position / self.N))

    def position(self, offset=0):
        return self.n + self.shift + offset


def schedule_tau(s, offset=0):
    return s.at(s.position(offset))
