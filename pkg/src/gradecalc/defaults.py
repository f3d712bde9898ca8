"""Default verification configurations for the built-in groups.

Each entry fixes the grid geometry, interior margin, dissipation strength and
the check times used by the verification suite.  The boxes are sized so that
every identity is tested in the regime where the grid supports it: mass at
small times (the kernel is contained and conservation is structural), the
semigroup identity at moderate times, and self-similarity across a pair of
dilation-related solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import Grid


@dataclass(frozen=True)
class HeatDefaults:
    half_widths: tuple
    counts: tuple
    margin: int = 4
    reg_strength: float = 0.05
    mass_times: tuple = (0.01, 0.02)
    family_times: tuple = (0.1, 0.2)
    semigroup_pairs: tuple = ((0.1, 0.1),)
    symmetry_time: float = 0.15
    selfsim_times: tuple = (0.1, 0.2)

    def grid(self) -> Grid:
        return Grid(self.half_widths, self.counts)


HEAT_DEFAULTS = {
    "abelian1": HeatDefaults(
        half_widths=(8.0,),
        counts=(161,),
        mass_times=(0.01, 0.02, 0.05, 0.1),
    ),
    "abelian2": HeatDefaults(
        half_widths=(4.0, 4.0),
        counts=(71, 71),
        mass_times=(0.01, 0.02, 0.05, 0.1),
    ),
    "abelian3": HeatDefaults(
        half_widths=(3.0, 3.0, 3.0),
        counts=(25, 25, 25),
        mass_times=(0.01, 0.02, 0.05),
    ),
    "heisenberg": HeatDefaults(
        half_widths=(2.7, 2.7, 0.95),
        counts=(19, 19, 53),
    ),
}


@dataclass(frozen=True)
class PotentialDefaults:
    """Grid and plan settings for the potential-kernel computations.

    The dissipation strength is much larger than for the heat checks: the
    kernels weight each eigenmode by an inverse power of its eigenvalue, so
    the spurious sawtooth modes of the composed stencils must sit at the top
    of the spectrum (not merely decay fast) or they pollute the near field.
    """

    half_widths: tuple
    counts: tuple
    margin: int = 4
    reg_strength: float = 1.0

    def grid(self) -> Grid:
        return Grid(self.half_widths, self.counts)


POTENTIAL_DEFAULTS = {
    "abelian1": PotentialDefaults(half_widths=(8.0,), counts=(641,)),
    "abelian3": PotentialDefaults(
        half_widths=(1.3, 1.3, 1.3), counts=(27, 27, 27), margin=3
    ),
    "heisenberg": PotentialDefaults(
        half_widths=(2.7, 2.7, 0.95), counts=(19, 19, 53)
    ),
}


def potential_defaults(name: str) -> PotentialDefaults:
    try:
        return POTENTIAL_DEFAULTS[name]
    except KeyError:
        raise KeyError(f"no default potential configuration for group {name!r}") from None


def heat_defaults(name: str) -> HeatDefaults:
    try:
        return HEAT_DEFAULTS[name]
    except KeyError:
        raise KeyError(f"no default heat configuration for group {name!r}") from None
