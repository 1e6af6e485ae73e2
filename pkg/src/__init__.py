"""
fblab
"""

__version__ = "0.1.0"
__description__ = "Numerical laboratory for the negative-exponent Alt-Phillips free boundary problem"
