"""Exception hierarchy shared by all modules."""


class QLHyperError(Exception):
    """Base class for every error raised by the package."""


class DSLSyntaxError(QLHyperError):
    """Malformed expression text. ``position`` is a 0-based character offset."""

    def __init__(self, message, text="", position=None):
        self.text = text
        self.position = position
        if position is not None:
            pointer = f"\n  {text}\n  {' ' * position}^"
            message = f"{message} at position {position}{pointer}"
        super().__init__(message)


class DefinitionError(QLHyperError):
    """A system or initial-data document is structurally invalid."""


class NonFiniteError(QLHyperError):
    """Evaluation produced inf or nan; ``subexpression`` names the culprit."""

    def __init__(self, subexpression, state=None):
        self.subexpression = subexpression
        self.state = state
        msg = f"non-finite value from subexpression '{subexpression}'"
        if state is not None:
            msg += f" at state {state}"
        super().__init__(msg)


class StrictHyperbolicityError(QLHyperError):
    """Complex or (nearly) repeated eigenvalues."""

    def __init__(self, message, state=None):
        self.state = state
        if state is not None:
            message = f"{message} at u={list(map(float, state))}"
        super().__init__(message)


class DomainError(QLHyperError):
    """A state left the validity ball of the system."""


class ClassificationError(QLHyperError):
    """Finite-difference derivative estimates disagree too much to classify."""


class CharacteristicError(QLHyperError):
    """A characteristic curve left the computational window."""


class StiffnessError(QLHyperError):
    """The ODE integrator failed without the solution growing."""


class SolverError(QLHyperError):
    """The PDE time stepper could not proceed."""
