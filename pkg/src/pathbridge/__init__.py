"""Maximum-entropy problems on path space for finite Markov chains and
finite-dimensional quantum Markov channels."""

__version__ = "0.1.0"
