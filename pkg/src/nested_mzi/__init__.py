"""Pre- and post-selected photons in nested Mach-Zehnder interferometers.

Weak values, weak traces on qubit pointers, and the quad-cell spectrum of
frequency-tagged vibrating mirrors.
"""

__version__ = "0.1.0"
