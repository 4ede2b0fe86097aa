import math
import numbers
from fractions import Fraction

from .exceptions import DomainError, ParameterError


def check_int(value, name, minimum=None, maximum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ParameterError("%s must be an integer, got %r" % (name, value))
    value = int(value)
    if minimum is not None and value < minimum:
        raise ParameterError("%s must be >= %s, got %d" % (name, minimum, value))
    if maximum is not None and value > maximum:
        raise ParameterError("%s must be <= %s, got %d" % (name, maximum, value))
    return value


def check_real(value, name, low=None, high=None, low_open=False, high_open=False,
               error=DomainError):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ParameterError("%s must be a real number, got %r" % (name, value))
    if math.isnan(value):
        raise error("%s must not be NaN" % name)
    if low is not None and (value < low or (low_open and value == low)):
        raise error("%s must be %s %s, got %r"
                    % (name, ">" if low_open else ">=", low, value))
    if high is not None and (value > high or (high_open and value == high)):
        raise error("%s must be %s %s, got %r"
                    % (name, "<" if high_open else "<=", high, value))
    return value


def ceil_mul(x, k):
    """``ceil(x * k)`` evaluated on the decimal value the user typed.

    ``0.1 * 3`` evaluates to ``0.30000000000000004``, so a ceiling taken on
    the binary product can land one too high. Reading ``x`` through its
    shortest repr avoids that.
    """
    return math.ceil(Fraction(repr(float(x))) * int(k))
