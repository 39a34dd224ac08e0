"""Physical constants and conversions between SI and internal units.

Internally lengths are measured in units of the disk radius ``a`` and angular
frequencies in units of ``c/a``, so the vacuum wavenumber equals the angular
frequency. Rates convert with the same factor, times with its inverse.
"""

C_LIGHT = 2.99792458e8  # m/s


def omega_to_si(omega, a):
    """Internal angular frequency (units of c/a) to rad/s."""
    return omega * C_LIGHT / a


def omega_from_si(omega_si, a):
    """Angular frequency in rad/s to internal units."""
    return omega_si * a / C_LIGHT


def length_to_si(x, a):
    return x * a


def length_from_si(x_si, a):
    return x_si / a


def time_to_si(t, a):
    """Internal time (units of a/c) to seconds."""
    return t * a / C_LIGHT
