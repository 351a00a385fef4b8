"""Exception hierarchy shared by all modules."""


class MomentFieldError(Exception):
    """Base class for all package errors."""


class ConfigError(MomentFieldError, ValueError):
    """Malformed or inconsistent network configuration."""


class EvaluationError(MomentFieldError, ValueError):
    """A right-hand side or Jacobian could not be evaluated (NaN, bad sizes)."""


class IntegrationError(MomentFieldError, RuntimeError):
    """Time stepping failed; ``last_t``/``last_state`` hold the last valid point."""

    def __init__(self, message, last_t=None, last_state=None):
        super().__init__(message)
        self.last_t = last_t
        self.last_state = last_state


class OrbitNotClosedError(MomentFieldError, RuntimeError):
    """A supposedly periodic trajectory does not close; ``mismatch`` is the norm."""

    def __init__(self, message, mismatch):
        super().__init__(message)
        self.mismatch = mismatch


class CycleNotFound(MomentFieldError, RuntimeError):
    """Shooting did not converge to a non-trivial periodic orbit."""


class NotHopfCandidate(MomentFieldError, ValueError):
    """Preconditions of the one-population Hopf construction are violated."""


class SizeRefusal(MomentFieldError, ValueError):
    """The master-equation state space is too large; ``n_states`` is the estimate."""

    def __init__(self, message, n_states):
        super().__init__(message)
        self.n_states = n_states


class ModelError(MomentFieldError, ValueError):
    """The Markov model produced an invalid transition rate."""
