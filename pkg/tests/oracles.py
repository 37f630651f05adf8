"""Frozen reference values used across the test suite.

Every value here was fixed before the corresponding implementation was
exercised; tests compare against these constants and never recompute them
with the code under test.
"""

import math

# Lattice setting shared by the figure reproductions (mm^-1).
N = 10
V_TUNNEL = 0.08
OMEGA = 0.628
T_END = 100.0

# Drive amplitudes that sever bond l0 (mm^-1); j0_1 * omega / (N - 2 l0 - 1).
CDT_G1 = {0: 0.167804, 1: 0.215748, 2: 0.302047}
# Counter-case amplitude 1.346e-4 um^-1 expressed in mm^-1.
LINE_IV_G1 = 0.134580

# Zeros of J0 (mpmath.besseljzero, 30 digits, rounded to double).
J0_ZEROS = [
    2.404825557695773,
    5.520078110286311,
    8.653727912911013,
    11.791534439014281,
    14.930917708487787,
    18.071063967910924,
    21.21163662987926,
    24.352471530749302,
    27.493479132040253,
    30.634606468431976,
]

# (x, J0(x), J1(x)) from mpmath at 30 digits; points straddle every branch.
BESSEL_TABLE = [
    (0.0, 1.0, 0.0),
    (0.5, 0.9384698072408129, 0.2422684576748739),
    (1.0, 0.7651976865579666, 0.4400505857449335),
    (2.404825557695773, -6.10876525973673e-17, 0.5191474972894667),
    (3.7, -0.39923020337119114, 0.05383398774546179),
    (7.5, 0.2663396578803784, 0.1352484275797055),
    (11.99, 0.045451560352858605, -0.22409937126624863),
    (12.01, 0.049920430319825355, -0.2227732009297032),
    (18.3, 0.04233583847140501, -0.18052307388650068),
    (24.9, 0.0832459683530155, -0.13485569953140886),
    (25.1, 0.10827567149994945, -0.11463478413442257),
    (33.3, 0.06333848594752126, 0.12386214790148009),
    (49.0, -0.05290003332227351, -0.10150612803431056),
]

# Design constants quoted for the waveguide realization.
KAPPA_AT_9UM = 0.2144  # mm^-1, dn = 2e-3
GAMMA_BAND = (0.5, 0.7)  # um^-1
D_MAX_REPORTED = 9.916  # um, spacing of the outermost bonds for v = 0.08


def binomial_occupations(N, v, t):
    """Undriven chain started at site 0: the chain is a spin-N/2 rotation,
    so occupations are binomial in sin^2(v t / 2)."""
    s = math.sin(0.5 * v * t) ** 2
    return [math.comb(N, l) * s**l * (1 - s) ** (N - l) for l in range(N + 1)]


def gaussian_width(w0, z_um, n_s, lambdabar):
    """1/e field half-width of a free Gaussian after distance z (um)."""
    z_r = n_s * w0**2 / (2 * lambdabar)
    return w0 * math.sqrt(1 + (z_um / z_r) ** 2)
