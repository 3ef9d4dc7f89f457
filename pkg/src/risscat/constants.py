"""Physical constants and the reference RIS hardware parameters."""

SPEED_OF_LIGHT = 299792458.0  # m/s

# reference RIS: 20x20 PIN-diode cells at half-wavelength spacing
FREQUENCY_HZ = 26.168e9
N_X = 20
N_Z = 20
SPACING_RATIO = 0.5
R0_OHM = 5.2
INDUCTANCE_H = 30e-12
C_MIN_F = 0.025e-12
C_MAX_F = 0.03e-12

# incidence / departure angle sets of the four reference scenarios (az, el) in degrees
AOA_SET = ((0.0, 0.0), (-30.0, -60.0))
AOD_SET = ((30.0, 0.0), (45.0, 0.0))

# Unit-cell PCB dimensions (meters). Documentation only; the dipole surrogate
# does not use them.
UNIT_CELL_DIMENSIONS_M = {
    "GL": 5.35e-3,
    "SW": 2.0e-3,
    "PL": 3.5e-3,
    "SL": 0.4e-3,
    "PW": 2.8e-3,
    "GW": 0.3e-3,
}

Z0_OHM = 50.0


def wavelength(frequency_hz: float) -> float:
    return SPEED_OF_LIGHT / frequency_hz
