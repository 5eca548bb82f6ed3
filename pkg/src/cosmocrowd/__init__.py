"""cosmocrowd - crowd-sensing platform for volunteer radiometric measurements."""

__version__ = "0.1.0"
