"""Physical constants used across the simulator."""

PLANCK = 6.62607015e-34  # J*s
LIGHTSPEED = 299792458.0  # m/s
