from .enums import Parity, Scheme, SignalKind, ExitCode
from .errors import (SGControlError, ConfigError, ContractViolation, DivergenceError, LadderFailure,
                     StageFailure)
from .torus import (TorusGeometry, ModeIndex, ModeSubspace, SobolevParams, SpectralField, helmholtz, op_L,
                    sobolev_norm)
from .builders import FieldBuilder
from .bilinear import full_B, direct_B
from .signals import ControlSignal, PiecewiseConstantSignal, constant_signal
from .dynamics import IntegratorConfig, Trajectory, integrate_plain, integrate_extended, integrate_perturbed
from .convexify import ConvexDecomposition, OscillationProfile, convex_decompose
from .saturation import LadderStep, ladder_build
from .pipeline import PipelineConfig, synthesize
from .storage import FileStorage

__version__ = '0.1'
