"""``epiabc`` command line: ingest, infer, project, histogram, benchmark.

Exit codes: 0 success, 1 runtime error, 2 configuration/usage error.
"""

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .analysis import histograms, posterior_csv_text, project, read_posterior_csv
from .config import TEMPLATE, load_settings
from .errors import ConfigError, EmptyPosterior, EpiABCError, MaxRunsExceeded
from .ingest import ObservedSeries, country_slug, default_population_table, ingest_country
from .model import PARAM_NAMES
from .prior import PriorSpec
from .runtime import benchmark_scaling, run_parallel

log = logging.getLogger("epiabc")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _overrides(args):
    return {
        ("abc", "tolerance"): getattr(args, "tolerance", None),
        ("abc", "batch_size"): getattr(args, "batch_size", None),
        ("runtime", "workers"): getattr(args, "workers", None),
        ("runtime", "seed"): getattr(args, "seed", None),
        ("data", "country"): getattr(args, "country", None),
    }


def _settings(args, days_key=None):
    overrides = _overrides(args)
    if days_key and getattr(args, "days", None) is not None:
        overrides[days_key] = args.days
    return load_settings(args.config, overrides)


def _output_path(settings, suffix, explicit=None):
    if explicit:
        return Path(explicit)
    return settings.out_dir / f"{country_slug(settings.country)}_{suffix}"


def cmd_ingest(args):
    if args.config:
        settings = load_settings(args.config, _overrides(args))
        paths = dict(confirmed=settings.confirmed, recovered=settings.recovered,
                     deaths=settings.deaths, population_table=settings.population_table)
        country, out_dir = settings.country, settings.series_dir
        threshold = settings.onset_threshold
    else:
        paths, country, out_dir, threshold = {}, args.country, None, 100
    for key in ("confirmed", "recovered", "deaths", "population_table"):
        if getattr(args, key):
            paths[key] = Path(getattr(args, key))
    out_dir = Path(args.out_dir) if args.out_dir else out_dir
    if args.onset_threshold is not None:
        threshold = args.onset_threshold
    if not paths.get("population_table"):
        paths["population_table"] = default_population_table()
    missing = [k for k in ("confirmed", "recovered", "deaths") if not paths.get(k)]
    if missing or not country or out_dir is None:
        names = missing + ([] if country else ["country"]) + ([] if out_dir else ["out_dir"])
        raise ConfigError(f"ingest needs: {', '.join(names)}")
    series = ingest_country(paths["confirmed"], paths["recovered"], paths["deaths"], country,
                            paths["population_table"], threshold)
    series.save(out_dir)
    print(f"{country}: {series.days} days from {series.start_date} "
          f"(population {series.population:.0f}) -> {out_dir}")
    return EXIT_OK


def cmd_infer(args):
    settings = _settings(args, days_key=("abc", "fit_days"))
    obs = ObservedSeries.load(settings.series_dir, settings.country)
    complete = True
    try:
        samples, stats = run_parallel(settings.run, obs)
    except MaxRunsExceeded as exc:
        samples, stats, complete = exc.samples, exc.stats, False
        log.error("%s", exc)
    posterior_path = _output_path(settings, "posterior.csv", args.out)
    stats_path = posterior_path.with_name(posterior_path.name.replace("posterior.csv", "stats.json"))
    if stats_path == posterior_path:
        stats_path = posterior_path.with_suffix(".stats.json")
    write_atomic(posterior_path, posterior_csv_text(samples))
    means = {}
    if samples:
        for j, name in enumerate(PARAM_NAMES):
            means[name] = sum(s.params.as_array()[j] for s in samples) / len(samples)
    payload = {
        "country": settings.country,
        "complete": complete,
        "tolerance": settings.run.tolerance,
        "batch_size": settings.run.batch_size,
        "num_workers": settings.run.num_workers,
        "seed": settings.run.seed,
        "fit_days": settings.run.fit_days,
        "filter_mode": settings.run.filter_mode,
        "stats": stats.to_dict(),
        "param_means": means,
    }
    write_atomic(stats_path, _json(payload))
    print(f"{len(samples)} samples in {stats.runs_executed} runs "
          f"({stats.wall_time_total:.1f}s) -> {posterior_path}")
    return EXIT_OK if complete else EXIT_RUNTIME


def cmd_project(args):
    settings = _settings(args, days_key=("output", "projection_days"))
    posterior_path = Path(args.posterior) if args.posterior else _output_path(
        settings, "posterior.csv")
    table = read_posterior_csv(posterior_path)
    if len(table) == 0:
        raise EmptyPosterior(f"{posterior_path} holds no samples")
    obs = ObservedSeries.load(settings.series_dir, settings.country)
    bands = project(table.params, obs, settings.projection_days, settings.percentiles,
                    seed=settings.run.seed, spread=settings.run.gaussian_spread)
    out = _output_path(settings, "bands.csv", args.out)
    write_atomic(out, bands.to_csv())
    fit = min(settings.run.fit_days, obs.days, bands.days)
    print(f"projected {len(table)} samples over {bands.days} days -> {out} "
          f"(fit-window coverage {bands.day_coverage(obs.window(fit)):.0%})")
    return EXIT_OK


def cmd_histogram(args):
    if args.config:
        settings = load_settings(args.config, _overrides(args))
        prior = settings.run.prior
        bins = settings.bins
        posterior_path = Path(args.posterior) if args.posterior else _output_path(
            settings, "posterior.csv")
        out = _output_path(settings, "histogram.json", args.out)
    else:
        if not args.posterior:
            raise ConfigError("histogram needs --posterior or --config")
        prior, bins = PriorSpec(), 20
        posterior_path = Path(args.posterior)
        out = Path(args.out) if args.out else posterior_path.with_name(
            posterior_path.stem + "_histogram.json")
    if args.bins is not None:
        bins = args.bins
    table = read_posterior_csv(posterior_path)
    if len(table) == 0:
        raise EmptyPosterior(f"{posterior_path} holds no samples")
    write_atomic(out, _json(histograms(table.params, prior, bins)))
    print(f"histograms of {len(table)} samples ({bins} bins) -> {out}")
    return EXIT_OK


def cmd_benchmark(args):
    settings = _settings(args, days_key=("abc", "fit_days"))
    obs = ObservedSeries.load(settings.series_dir, settings.country)
    try:
        workers = [int(w) for w in args.workers_list.split(",")]
    except ValueError:
        raise ConfigError("--workers-list must be comma-separated integers") from None
    report = benchmark_scaling(settings.run, obs, workers, runs=args.runs,
                               repetitions=args.repetitions)
    base = Path(args.out) if args.out else settings.out_dir / "benchmark"
    write_atomic(base.with_suffix(".csv"), report.to_csv())
    write_atomic(base.with_suffix(".json"), _json(report.to_dict()))
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def cmd_template(args):
    sys.stdout.write(TEMPLATE)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="epiabc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", "-c", required=config_required, help="INI run configuration")
        p.add_argument("--country")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", "-o", help="explicit output path")

    p = sub.add_parser("ingest", help="JHU CSVs -> per-country series files")
    common(p, config_required=False)
    p.add_argument("--confirmed")
    p.add_argument("--recovered")
    p.add_argument("--deaths")
    p.add_argument("--population-table", dest="population_table")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--onset-threshold", dest="onset_threshold", type=float)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("infer", help="run ABC until the accepted-sample target is met")
    common(p)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--days", type=int, help="fit window length")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("project", help="percentile bands of forward simulations")
    common(p)
    p.add_argument("--posterior")
    p.add_argument("--days", type=int, help="projection length")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("histogram", help="per-parameter posterior histograms")
    common(p, config_required=False)
    p.add_argument("--posterior")
    p.add_argument("--bins", type=int)
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("benchmark", help="worker-count scaling report")
    common(p)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--workers-list", dest="workers_list", default="1,2,4")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--days", type=int, help="fit window length")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("template", help="print a config template")
    p.set_defaults(func=cmd_template)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"epiabc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EpiABCError, OSError, ValueError) as exc:
        print(f"epiabc: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
