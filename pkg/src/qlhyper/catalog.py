"""Built-in systems and synthetic test systems."""

from __future__ import annotations

from .dsl import build_system
from .errors import DefinitionError

BUILTIN_SYSTEMS = {
    "burgers": dict(n=1, A=[["u1"]], B=["0"]),
    "decoupled-pair": dict(n=2, A=[["u1", "0"], ["0", "1 + u2"]], B=["0", "0"]),
    "wld-pair": dict(n=2, A=[["u1^2", "0"], ["0", "1 + u2"]], B=["0", "0"]),
    "matched-source": dict(n=2, A=[["u1", "0"], ["0", "1 + u2"]], B=["u1*u2", "0"]),
}

# examples that are strictly hyperbolic but not in normalized coordinates
EXTRA_SYSTEMS = {
    "constant-symmetric": dict(n=2, A=[["0", "1"], ["1", "0"]], B=["0", "0"]),
    "p-system": dict(n=2, A=[["0", "1"], ["1 + u1", "0"]], B=["0", "0"]),
}


def builtin_system(name, delta=0.5):
    spec = BUILTIN_SYSTEMS.get(name) or EXTRA_SYSTEMS.get(name)
    if spec is None:
        known = sorted(BUILTIN_SYSTEMS) + sorted(EXTRA_SYSTEMS)
        raise DefinitionError(f"unknown built-in system {name!r}; known: {known}")
    return build_system(name, spec["n"], spec["A"], spec["B"], delta)


def power_law_system(alpha, c=1.0, lam0=0.0, second_speed=None, delta=0.5):
    """Diagonal system with lambda_1(u1) = lam0 + c u1^(alpha+1).

    With ``second_speed`` a second, linear family ``second_speed + u2`` is
    appended so that the system is 2x2.
    """
    head = f"{lam0!r} + {c!r} * u1^{alpha + 1}"
    if second_speed is None:
        return build_system(f"power-law-{alpha}", 1, [[head]], ["0"], delta)
    return build_system(f"power-law-{alpha}", 2,
                        [[head, "0"], ["0", f"{second_speed!r} + u2"]], ["0", "0"], delta)
