"""Vision-guided multicopter interception simulator (IBVS + proportional navigation)."""

__version__ = "0.1.0"
