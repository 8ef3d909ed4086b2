# Torus radii (q1, q2); the torus has periods 2πq1 and 2πq2
Q = [1.0, 1.0]

# Second grade fluid parameter and viscosity
ALPHA = 1.0
NU = 0.1

# Galerkin truncation |m1| + |m2| <= TRUNC
TRUNC = 6

# Horizon and nominal step; the step grid also contains every control knot.
# Without DT the step is DT_FRACTION times the horizon.
HORIZON = 1.0
DT = None
DT_FRACTION = 1e-3

# One of 'etd-rk2', 'etd-rk4-classical'
SCHEME = 'etd-rk4-classical'

# Divergence is reported once the V1 norm exceeds this multiple of max(|U(0)|, 1)
BLOWUP_FACTOR = 1e6

# Seed of numpy.random.default_rng, overridden by --seed
SEED = 0

# Fields are given as {"modes": [{"m": [m1, m2], "a": .., "b": ..}]}.
# A missing initial state is drawn at random on |m| <= RANDOM_MAX_ORDER by
# simulate and is zero for control.
INITIAL_STATE = None
TARGET_STATE = None
RANDOM_MAX_ORDER = 3
RANDOM_AMPLITUDE = 1.0

# Constant-in-time forcing and control of the simulate command
FORCING = None
CONTROL = None

# Write snapshots/state_XXXXXX.json every n-th recorded time (0 disables them)
SNAPSHOT_EVERY = 0

# Oscillation counts of the relax command (required by it)
RELAX_KS = None
RELAX_DIRECTIONS = 2
RELAX_DT = 1e-2

# Ladder command: highest certified order and preferred pairs
# [{"target": [l1, l2], "pair": [[m1, m2], [n1, n2]]}, ...]
LADDER_ORDER = 6
LADDER_PREFERRED_PAIRS = []

# Control command accuracy; EPSILON wins over EPSILON_RELATIVE * |U_T|_V1 when set
EPSILON = None
EPSILON_RELATIVE = 0.1

# Control command schedule
K_PROJECT = 3
SEGMENTS = 16
OSCILLATION_START = 16
OSCILLATION_CAP = 1024
RAMP_FRACTION = 0.45
LIFT_PER_OSCILLATION = 0.5
RAMP_SUBSTEPS = 4
HIGH_MODE_FRACTION = 0.1

# Sample times of control.csv
CONTROL_SAMPLES = 1000
