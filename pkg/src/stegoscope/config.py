"""Flat ``key = value`` run-configuration files."""

import os

from .errors import BadConfig

SEED_ENV = "STEGOSCOPE_SEED"


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment. Keys are normalised to snake_case."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise BadConfig(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise BadConfig(f"{path}:{lineno}: empty key")
            values[key.replace("-", "_")] = value
    return values


def resolve_seed(explicit):
    if explicit is not None:
        return int(explicit)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env, 0)
        except ValueError:
            raise BadConfig(f"{SEED_ENV}={env!r} is not an integer") from None
    return 0


def parse_float_list(text):
    try:
        values = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise BadConfig(f"bad number list {text!r}") from None
    if not values:
        raise BadConfig("empty number list")
    return values
