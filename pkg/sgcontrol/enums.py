from enum import Enum, IntEnum


class Parity(Enum):
    """Trigonometric parity of a basis function.

    ``c_m = m^{q,⊥} cos⟨m, x⟩_q`` and ``s_m = m^{q,⊥} sin⟨m, x⟩_q``.
    """
    COS = 'cos'
    """Cosine basis function c_m."""

    SIN = 'sin'
    """Sine basis function s_m."""


class Scheme(Enum):
    """Exponential time differencing schemes.

    The diagonal operator L is integrated exactly, the nonlinearity and the
    controls by the Runge-Kutta rule.

    See Also:
        - Cox & Matthews, Exponential time differencing for stiff systems, J. Comput. Phys. 176 (2002).
        - Kassam & Trefethen, Fourth-order time-stepping for stiff PDEs, SIAM J. Sci. Comput. 26 (2005).
    """
    ETD_RK2 = 'etd-rk2'
    """Second order, two nonlinear evaluations per step."""

    ETD_RK4 = 'etd-rk4-classical'
    """Fourth order, four nonlinear evaluations per step."""

    @property
    def order(self) -> int:
        return {Scheme.ETD_RK2: 2, Scheme.ETD_RK4: 4}[self]


class SignalKind(Enum):
    """How a control signal represents its time dependence."""
    PIECEWISE_CONSTANT = 'piecewise-constant'
    SAMPLED = 'sampled'
    POLYNOMIAL = 'polynomial'
    SMOOTH = 'smooth'
    """C¹ ramps, used for lifted shifts."""

    COMPOSITE = 'composite'


class ExitCode(IntEnum):
    """Process exit codes of the ``sgcontrol`` command."""
    ok = 0
    config_error = 2
    diverged = 3
    #: A ladder was built but its certificate does not replay; shares the code of divergence.
    unverified = 3
    stage_failed = 4
