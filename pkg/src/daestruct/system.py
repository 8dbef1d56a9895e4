"""Container for a square DAE system in expression form."""

from __future__ import annotations

from dataclasses import dataclass, field

from .expr import Expr, jet_vars


@dataclass(frozen=True)
class DaeSystem:
    """Equations F_i = 0 over dependent variables named var_names.

    Equations are expression trees over jet variables whose var_index refers
    to positions in var_names.  Parameters are already folded to constants.
    """

    equations: tuple[Expr, ...]
    var_names: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        for eq in self.equations:
            for jv in jet_vars(eq):
                if jv.var_index >= len(self.var_names):
                    raise ValueError(
                        f"equation references variable index {jv.var_index} "
                        f"but only {len(self.var_names)} variables are declared")

    @property
    def n_equations(self) -> int:
        return len(self.equations)

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    def is_square(self) -> bool:
        return self.n_equations == self.n_vars
