"""Event-driven simulation of contact processes with blocked sites on the integer lattice."""

try:
    from importlib.metadata import version

    __version__ = version("contact-fronts")
except Exception:
    __version__ = "unknown"
