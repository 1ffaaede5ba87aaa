"""Command-line harness: ``aprenorm <command> [options]``.

Commands share one configuration, read from an optional ``key = value``
file and overridden by flags.  Every report starts with ``#`` header lines
recording the package version, precision, truncation degree and the hash of
the fixed-point cache it was computed from.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .errors import ConfigurationError, DomainEscapeError, RenormError

log = logging.getLogger("aprenorm")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_DOMAIN = 4


def _floats(text):
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _ints(text):
    text = str(text).strip()
    if ".." in text and "," not in text:
        lo, hi = text.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(v) for v in text.replace(";", ",").split(",") if v.strip())


@dataclass
class RunConfig:
    precision: str = "double"
    degree: int = 40
    tol: float = 1e-12
    rho: float = 1.75
    spectrum_N: tuple = (10, 15, 20, 25)
    reality_rows: tuple = (32, 33, 34, 60, 61, 62, 63)
    product_tol: float = 1e-3
    eps: tuple = (1e-4, 1e-5, 1e-6, 1e-7, 1.593584796420859e-8)
    levels: tuple = tuple(range(3, 13))
    angles: int = 512
    norm: str = "spectral"
    bins: tuple = (1000, 5000, 15000)
    orbit_levels: tuple = (12, 14, 16)
    iters: int = 20000
    orbit_n: int = 8
    out: str = "reports"
    cache: str = ""
    json: bool = False

    _parsers = {
        "precision": str,
        "degree": int,
        "tol": float,
        "rho": float,
        "spectrum_N": _ints,
        "reality_rows": _ints,
        "product_tol": float,
        "eps": _floats,
        "levels": _ints,
        "angles": int,
        "norm": str,
        "bins": _ints,
        "orbit_levels": _ints,
        "iters": int,
        "orbit_n": int,
        "out": str,
        "cache": str,
        "json": lambda v: str(v).strip().lower() in ("1", "true", "yes", "on"),
    }

    def update(self, key, value):
        key = key.strip().replace("-", "_")
        if key not in self._parsers:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        try:
            setattr(self, key, self._parsers[key](value))
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {key}: {value!r}") from exc

    def validate(self):
        from .dynamics import PRECISIONS
        from .holder import EPS_GATE, NORMS

        if self.precision not in PRECISIONS:
            raise ConfigurationError(f"precision must be one of {PRECISIONS}")
        if self.norm not in NORMS:
            raise ConfigurationError(f"norm must be one of {tuple(NORMS)}")
        positive = ("degree", "tol", "rho", "angles", "iters", "product_tol")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        for name in ("spectrum_N", "reality_rows", "levels", "bins", "orbit_levels"):
            if any(v <= 0 for v in getattr(self, name)):
                raise ConfigurationError(f"{name} entries must be positive")
        if any(not 0 < abs(e) <= EPS_GATE for e in self.eps):
            raise ConfigurationError(f"eps values must satisfy 0 < |eps| <= {EPS_GATE:g}")
        if any(N > self.degree for N in self.spectrum_N):
            raise ConfigurationError("projection degrees cannot exceed the truncation degree")
        return self

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


def read_config(path):
    cfg = RunConfig()
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        cfg.update(k, v.strip())
    return cfg


# shared plumbing --------------------------------------------------------------------
class Context:
    def __init__(self, cfg):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self._fp = None

    @property
    def cache_dir(self):
        from .fixedpoint import default_cache_dir

        return Path(self.cfg.cache) if self.cfg.cache else default_cache_dir()

    @property
    def cache_path(self):
        return self.cache_dir / f"fixed_point_d{self.cfg.degree}_rho{self.cfg.rho:g}.txt"

    def fixed_point(self):
        from .fixedpoint import load_or_compute

        if self._fp is None:
            self._fp = load_or_compute(self.cfg.degree, self.cache_dir, self.cfg.tol, self.cfg.rho)
        return self._fp

    def cache_hash(self):
        p = self.cache_path
        return hashlib.sha256(p.read_bytes()).hexdigest()[:16] if p.exists() else "none"

    def header(self, notes=()):
        lines = [
            f"# aprenorm {__version__}",
            f"# precision={self.cfg.precision} degree={self.cfg.degree} rho={self.cfg.rho:g} cache_sha256={self.cache_hash()}",
        ]
        lines += [f"# note: {n}" for n in notes]
        return "\n".join(lines) + "\n"

    def write(self, name, body, notes=()):
        """CSV with header; JSON mirror of the rows when requested."""
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        path.write_text(self.header(notes) + body)
        if self.cfg.json:
            rows = body.strip().splitlines()
            keys = rows[0].split(",") if rows else []
            data = {
                "meta": {"version": __version__, "cache_sha256": self.cache_hash(), "notes": list(notes)},
                "rows": [dict(zip(keys, r.split(","))) for r in rows[1:]],
            }
            path.with_suffix(".json").write_text(json.dumps(data, indent=1) + "\n")
        log.info("wrote %s", path)
        return path


# commands -------------------------------------------------------------------------
def cmd_fixed_point(ctx, force=False):
    from .fixedpoint import find_fixed_point, save_record

    if force:
        fp = find_fixed_point(degree=ctx.cfg.degree, tol=ctx.cfg.tol, rho=ctx.cfg.rho)
        save_record(fp, ctx.cache_path)
        ctx._fp = fp
    fp = ctx.fixed_point()
    print(f"lambda*  = {fp.lam!r}")
    print(f"mu*      = {fp.mu!r}")
    print(f"residual = {fp.residual:.3e}")
    print(f"cache    = {ctx.cache_path} ({ctx.cache_hash()})")
    return fp


def cmd_spectrum(ctx):
    from .fixedpoint import classify_products, reality_report, spectrum

    fp = ctx.fixed_point()
    lines = []
    for N in ctx.cfg.spectrum_N:
        rep = classify_products(spectrum(fp, N), fp.lam, fp.mu, ctx.cfg.product_tol)
        ctx.write(f"spectrum_N{N}.csv", rep.to_csv(), notes=["ranks by modulus, largest first"])
        lines.append(f"N={N}: dim={len(rep)} lead={rep[1].re:.15g} second={rep[2].re:.15g}")
    table = reality_report(fp, ctx.cfg.spectrum_N, ctx.cfg.reality_rows)
    body = "N,rank,re,im\n" + "".join(
        f"{N},{e.rank},{e.re!r},{e.im!r}\n" for N, entries in table.items() for e in entries
    )
    ctx.write(
        "reality.csv",
        body,
        notes=["ranks by modulus; the two transitioning pairs sit in ranks 32-33 and 60-63"],
    )
    print("\n".join(lines))


def cmd_holder(ctx):
    from .holder import run_holder

    cfg = ctx.cfg
    if not cfg.eps:
        raise ConfigurationError("empty eps list")
    if cfg.precision != "double":
        raise ConfigurationError("the Hölder sweep runs in double precision only; use the API for extended checks")
    fp = ctx.fixed_point()
    rep = run_holder(
        fp, cfg.eps, cfg.levels, cfg.angles, cfg.norm, progress=lambda n: log.info("level %d done", n)
    )
    notes = [f"t-grid {cfg.angles}", f"matrix norm {cfg.norm}", "|p| is the Euclidean norm of the orbit point"]
    ctx.write("holder_levels.csv", rep.levels_csv(), notes)
    ctx.write("holder_fit.csv", rep.fit_csv(), notes)
    ctx.write("holder_curve.csv", rep.curve_csv(), notes)
    print(f"{'eps':>22} {'alpha(eps)':>14} {'rel. error':>11}")
    for eps, f in rep.fits.items():
        print(f"{eps:>22.16g} {f.a:>14.6e} {f.rel_lsq_error:>11.2%}")
    return rep


def cmd_cocycle(ctx):
    from .cocycle import angle_histogram, direction_field, ergodic_tables, lyapunov_estimate, tables_csv
    from .dynamics import periodic_orbit

    cfg = ctx.cfg
    fp = ctx.fixed_point()
    n0 = min(cfg.orbit_levels)
    hist = angle_histogram(direction_field(periodic_orbit(fp, n0, check=False)), max(cfg.bins), n0)
    notes = [f"stable field on the level-{n0} orbit", "angles of vectors in [0, 2pi)"]
    ctx.write(f"angles_n{n0}.csv", hist.to_csv(), notes)
    tables = ergodic_tables(fp, levels=cfg.orbit_levels, bins=cfg.bins, M=cfg.iters)
    ctx.write(
        "ergodic.csv",
        tables_csv(tables),
        notes=["n is the orbit level of the histogram", "Birkhoff sums use the coded orbit of the origin"],
    )
    for (f, v), table in tables.items():
        print(f"{f}, v={v}")
        print("  n  " + "".join(f"{N:>14d}" for N in cfg.bins))
        for n in cfg.orbit_levels:
            print(f"  {n:<3d}" + "".join(f"{table[(n, N)].rel_diff:>14.4e}" for N in cfg.bins))
    for v in ((1.0, 0.0), (0.0, 1.0)):
        print(f"Lyapunov estimate M={cfg.iters} v={v}: {lyapunov_estimate(fp, cfg.iters, v):+.3e}")
    return tables


def cmd_orbit(ctx):
    from .dynamics import periodic_orbit

    fp = ctx.fixed_point()
    orb = periodic_orbit(fp, ctx.cfg.orbit_n, precision=ctx.cfg.precision)
    ctx.write(f"orbit_n{ctx.cfg.orbit_n}.csv", orb.to_csv(), notes=["bits list the least significant digit first"])
    e = orb.eigen
    print(f"fixed point x* = {float(orb.base.x)!r}")
    print(f"eigenvalues    = {float(e.e_plus)!r}, {float(e.e_minus)!r}")
    print(f"stable vector  = (1, {float(e.stable[1])!r})")
    print(f"orbit points   = {len(orb)}")
    return orb


# entry point ----------------------------------------------------------------------
def build_parser():
    p = argparse.ArgumentParser(prog="aprenorm", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--precision", choices=("double", "extended"))
    common.add_argument("--degree", type=int, help="truncation degree of the series")
    common.add_argument("--levels", help="renormalization levels, e.g. 3..12 or 3,4,5")
    common.add_argument("--eps", help="comma-separated eps values")
    common.add_argument("--angles", type=int, help="t-grid size")
    common.add_argument("--bins", help="histogram bin counts")
    common.add_argument("--iters", type=int, help="Birkhoff iteration count")
    common.add_argument("--json", action="store_true", help="also write JSON mirrors")
    common.add_argument("--cache", help="fixed-point cache directory")
    sub = p.add_subparsers(dest="command", required=True)
    fpp = sub.add_parser("fixed-point", parents=[common], help="compute or load the fixed point")
    fpp.add_argument("--force", action="store_true", help="recompute even if cached")
    sp = sub.add_parser("spectrum", parents=[common], help="eigenvalues of the linearization")
    sp.add_argument("--N", dest="spectrum_N", help="projection degrees")
    sub.add_parser("holder", parents=[common], help="Hölder exponent sweep and fit")
    cp = sub.add_parser("cocycle", parents=[common], help="angle histograms and Birkhoff comparisons")
    cp.add_argument("--orbit-levels", dest="orbit_levels", help="histogram orbit levels")
    op = sub.add_parser("orbit", parents=[common], help="dump a periodic orbit")
    op.add_argument("-n", dest="orbit_n", type=int, help="orbit level")
    return p


def config_from_args(args):
    cfg = read_config(args.config) if args.config else RunConfig()
    for key in ("out", "precision", "degree", "levels", "eps", "angles", "bins", "iters", "cache",
                "spectrum_N", "orbit_levels", "orbit_n"):
        val = getattr(args, key, None)
        if val is not None:
            cfg.update(key, val)
    if args.json:
        cfg.json = True
    return cfg.validate()


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        ctx = Context(config_from_args(args))
        if args.command == "fixed-point":
            cmd_fixed_point(ctx, force=args.force)
        elif args.command == "spectrum":
            cmd_spectrum(ctx)
        elif args.command == "holder":
            cmd_holder(ctx)
        elif args.command == "cocycle":
            cmd_cocycle(ctx)
        elif args.command == "orbit":
            cmd_orbit(ctx)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainEscapeError as exc:
        print(f"domain escape: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except RenormError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
