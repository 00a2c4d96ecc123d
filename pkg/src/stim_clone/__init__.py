"""simulation and analysis of photon cloning by stimulated down-conversion"""

__version__ = "0.1.0"
