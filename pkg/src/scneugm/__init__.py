"""Neural graph modeling for coloring-based RTWT slot assignment in Wi-Fi networks."""

__version__ = "0.1.0"
