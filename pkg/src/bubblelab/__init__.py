"""Numerics for constant-mean-curvature tori in warped products Y x R.

Modules: ``profile`` (warp factor from phi), ``family`` (the CMC profiles),
``stability`` (Jacobi spectra), ``flow`` (slice-volume descent on a torus),
``bounds`` (closed-form inequalities), ``embed`` (R^3 realisation and OBJ),
``cli`` (batch front end).
"""

from .errors import (BubbleLabError, InvalidInputError, NumericalFailure,
                     PreconditionError, UndefinedBoundError)

__version__ = "0.1.0"
