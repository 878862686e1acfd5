"""INI run-configuration files.

Sections ``data``, ``prior``, ``model``, ``abc``, ``runtime`` and ``output``.
Every inference knob has a default; the keys in ``REQUIRED`` must be present.
"""

import configparser
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, InvalidPrior
from .inference import RunConfig
from .prior import DEFAULT_UPPER, PriorSpec

REQUIRED = (
    ("data", "series_dir"),
    ("data", "country"),
    ("abc", "tolerance"),
    ("runtime", "seed"),
    ("output", "dir"),
)

TEMPLATE = """\
[data]
series_dir = data
country = Italy
onset_threshold = 100
# only needed by `epiabc ingest`
confirmed = jhu/time_series_covid19_confirmed_global.csv
recovered = jhu/time_series_covid19_recovered_global.csv
deaths = jhu/time_series_covid19_deaths_global.csv
population_table =

[prior]
lower = 0, 0, 0, 0, 0, 0, 0, 0
upper = 1, 100, 2, 1, 1, 1, 1, 2

[model]
gaussian_spread = variance_sqrt_h

[abc]
tolerance = 2e5
batch_size = 100000
target_accepted = 100
chunk_size = 10000
filter_mode = chunked
# top_k defaults to 5, or 1 when tolerance <= 5e4
fit_days = 49
max_runs = 100000
early_reject = false

[runtime]
workers = 1
seed = 0

[output]
dir = out
projection_days = 120
percentiles = 5, 95
bins = 20
"""


@dataclass
class Settings:
    run: RunConfig
    series_dir: Path
    country: str
    out_dir: Path
    onset_threshold: float = 100
    projection_days: int = 120
    percentiles: tuple = (5, 95)
    bins: int = 20
    confirmed: Path = None
    recovered: Path = None
    deaths: Path = None
    population_table: Path = None


def _vector(text, key):
    try:
        values = tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"[{key[0]}] {key[1]}: expected numbers, got {text!r}") from None
    return values


def _get(parser, section, key, convert, default=None):
    if not parser.has_option(section, key) or parser.get(section, key).strip() == "":
        return default
    raw = parser.get(section, key).strip()
    try:
        return convert(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def _bool(text):
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text):
    return int(float(text)) if "e" in text.lower() else int(text)


def load_settings(path, overrides=None):
    """Parse a config file; ``overrides`` maps ``(section, key)`` to raw strings."""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for (section, key), value in (overrides or {}).items():
        if value is None:
            continue
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, str(value))
    for section, key in REQUIRED:
        if not parser.has_option(section, key) or not parser.get(section, key).strip():
            raise ConfigError(f"missing config key [{section}] {key}")

    base = path.parent

    def rel(p):
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else base / p

    lower = _get(parser, "prior", "lower", lambda t: _vector(t, ("prior", "lower")), (0.0,) * 8)
    upper = _get(parser, "prior", "upper", lambda t: _vector(t, ("prior", "upper")),
                 DEFAULT_UPPER)
    tolerance = _get(parser, "abc", "tolerance", float)
    run_kwargs = dict(
        tolerance=tolerance,
        batch_size=_get(parser, "abc", "batch_size", _int, 100_000),
        target_accepted=_get(parser, "abc", "target_accepted", _int, 100),
        chunk_size=_get(parser, "abc", "chunk_size", _int, 10_000),
        filter_mode=_get(parser, "abc", "filter_mode", str, "chunked"),
        top_k=_get(parser, "abc", "top_k", _int, None),
        fit_days=_get(parser, "abc", "fit_days", _int, 49),
        max_runs=_get(parser, "abc", "max_runs", _int, 100_000),
        early_reject=_get(parser, "abc", "early_reject", _bool, False),
        num_workers=_get(parser, "runtime", "workers", _int, 1),
        seed=_get(parser, "runtime", "seed", _int),
        gaussian_spread=_get(parser, "model", "gaussian_spread", str, "variance_sqrt_h"),
    )
    try:
        run_kwargs["prior"] = PriorSpec(lower, upper)
        run = RunConfig(**run_kwargs)
    except (ValueError, InvalidPrior) as exc:
        raise ConfigError(str(exc)) from None
    percentiles = _get(parser, "output", "percentiles", lambda t: _vector(t, ("output", "")),
                       (5.0, 95.0))
    if len(percentiles) != 2:
        raise ConfigError("[output] percentiles: expected two values, e.g. '5, 95'")
    return Settings(
        run=run,
        series_dir=rel(parser.get("data", "series_dir")),
        country=parser.get("data", "country").strip(),
        out_dir=rel(parser.get("output", "dir")),
        onset_threshold=_get(parser, "data", "onset_threshold", float, 100.0),
        projection_days=_get(parser, "output", "projection_days", _int, 120),
        percentiles=tuple(percentiles),
        bins=_get(parser, "output", "bins", _int, 20),
        confirmed=rel(_get(parser, "data", "confirmed", str)),
        recovered=rel(_get(parser, "data", "recovered", str)),
        deaths=rel(_get(parser, "data", "deaths", str)),
        population_table=rel(_get(parser, "data", "population_table", str)),
    )
