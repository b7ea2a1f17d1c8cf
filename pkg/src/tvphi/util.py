"""
Utility module containing objects shared by all other modules in this library.
"""
import math
import os
import pathlib
import tempfile
from contextlib import contextmanager

# nominal gray-level range of 8-bit images
PEAK = 255.0

INF_TOKEN = 'Inf'


class TVPhiException(Exception):
    pass


class TVPhiConfigError(TVPhiException):
    pass


class TVPhiDomainError(TVPhiException):
    pass


class TVPhiDegenerateError(TVPhiException):
    pass


class TVPhiConvergenceError(TVPhiException):
    """Raised when an inner solve gives up. The partial solver report is attached as `report`."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


def parse_cutoff(value: str | float) -> float:
    """Parse a cut-off value where `inf` (any case) stands for an infinite cut-off.

    Args:
        value (str | float): Number or the literal token `inf`.

    Raises:
        TVPhiConfigError: Value is neither a non-negative number nor `inf`

    Returns:
        float: Parsed cut-off, `math.inf` for the infinite token.
    """
    if isinstance(value, str) and value.strip().lower() in ('inf', '∞'):
        return math.inf
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise TVPhiConfigError(f'Invalid cut-off {value!r}. Use a non-negative number or `inf`.')
    if math.isnan(out) or out < 0:
        raise TVPhiConfigError(f'Invalid cut-off {value!r}. Use a non-negative number or `inf`.')
    return out


def format_cutoff(value: float) -> str:
    """Format a cut-off for tables, writing infinity as `Inf`."""
    if math.isinf(value):
        return INF_TOKEN
    return f'{value:g}'


@contextmanager
def atomic_write(path: str | pathlib.Path, mode: str = 'w'):
    """Open a temporary file next to `path` and move it into place only once writing succeeded.

    Interrupted writes leave the destination untouched.

    Args:
        path (str | pathlib.Path): Destination file
        mode (str, optional): 'w' for text or 'wb' for binary output. Defaults to 'w'.
    """
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f'.{path.name}.', suffix='.tmp', dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if 'b' in mode else {'newline': ''})) as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def write_table(df, path: str | pathlib.Path):
    """Write a pandas DataFrame as CSV atomically."""
    with atomic_write(path) as f:
        df.to_csv(f, index=False, lineterminator='\n')
