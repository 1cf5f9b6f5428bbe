"""Physical constants used throughout the simulator.

All frequencies in this package are angular (rad/s) unless a name says
otherwise; Hamiltonians are expressed in angular-frequency units (hbar = 1
in the dynamics, SI seconds for time).
"""

import math

import scipy.constants as _const

HBAR = _const.hbar
KB = _const.k
ELEMENTARY_CHARGE = _const.e
EPSILON_0 = _const.epsilon_0
ATOMIC_MASS_KG = _const.atomic_mass

# 171Yb+ single-ion mass.
YB171_MASS_AMU = 170.936323
YB171_MASS_KG = YB171_MASS_AMU * ATOMIC_MASS_KG

# Electronic gyromagnetic factor for the S=1/2 ground manifold,
# 2.8 MHz/G expressed in rad/s per tesla.
GAMMA_E = 2.0 * math.pi * 2.8e10

TWO_PI = 2.0 * math.pi
