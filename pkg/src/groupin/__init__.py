"""Group inference from RSSI traces observed by multiple wireless scanners."""

__version__ = "0.1.0"
