"""Exception types raised across the package."""


class OpflowError(Exception):
    """Base class for all package-specific errors."""


class IsolatedNode(OpflowError):
    """A node has no neighbor with positive weight, so row normalization fails."""

    def __init__(self, node: int):
        super().__init__(f"node {node} has no neighbor with positive weight")
        self.node = node


class DisconnectedAfterRetries(OpflowError):
    """No connected sample was found within the retry budget."""

    def __init__(self, attempts: int):
        super().__init__(f"no connected graph sampled in {attempts} attempts")
        self.attempts = attempts


class ParseError(OpflowError):
    """Malformed edge-list line."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class NegativeWeight(OpflowError):
    """Edge weight below zero in an edge-list file."""

    def __init__(self, line: int):
        super().__init__(f"line {line}: negative edge weight")
        self.line = line


class AsymmetricInput(OpflowError):
    """Edge list is directed but symmetrize=False was requested."""


class NonpositiveState(OpflowError):
    """An opinion vector left the positive sector."""

    def __init__(self, msg: str = "state left the positive sector", step=None):
        if step is not None:
            msg = f"{msg} (step {step})"
        super().__init__(msg)
        self.step = step


class DivisionByZeroLambda(OpflowError):
    """lambda_i = 0 cannot be folded into sigma_i = (1 - lambda_i) / lambda_i."""


class StepSizeUnderflow(OpflowError):
    """Adaptive halving exhausted its budget without restoring the invariant box."""


class InsufficientDecay(OpflowError):
    """Spread never entered the fitting window, so no decay rate is defined."""


class MaxIterExceeded(OpflowError):
    """Newton iteration failed to reach the residual target."""


class SingularJacobian(OpflowError):
    """Jacobian linear solve failed at an iterate."""


class SingularSystem(OpflowError):
    """The linear steady-state system is singular (all lambda_i = 1)."""


class NashViolation(OpflowError):
    """A profitable unilateral deviation exists."""

    def __init__(self, agent: int, candidate: float, improvement: float):
        super().__init__(
            f"agent {agent} improves payout by {improvement:.3e} at x_i={candidate:.6g}"
        )
        self.agent = agent
        self.candidate = candidate
        self.improvement = improvement


class MultistartMismatch(OpflowError):
    """Distinct Newton roots were reached from different starts."""

    def __init__(self, agreement: float, tol: float):
        super().__init__(f"multistart roots disagree: {agreement:.3e} > {tol:.3e}")
        self.agreement = agreement


class ConfigError(OpflowError):
    """Invalid experiment configuration."""
