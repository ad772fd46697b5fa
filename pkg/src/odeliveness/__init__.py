"""Deductive liveness verifier for polynomial ODEs.

Proves goals of the form "the solution eventually satisfies P while staying
in the domain Q" by refining existence properties through box-modality
obligations, checks the arithmetic with a sound-incomplete interval backend,
and falsifies wrong claims numerically.
"""

__version__ = "0.1.0"
