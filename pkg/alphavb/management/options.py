"""Flags and spec assembly shared by the fit, bench and sweep_alpha commands."""

import json
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from ..bench import METHODS, SolverSettings, run_and_write
from ..exceptions import AlphaVBError
from ..metrics import ESTIMATORS
from ..serializers import BenchSpecSerializer
from ..simgen import PREDEFINED_CONFIGS

EXIT_BAD_INPUT = 2
EXIT_DIVERGED = 3

# argparse dest -> serializer / SolverSettings field
SOLVER_FLAGS = {
    "lam": "lam",
    "a0": "a0",
    "b0": "b0",
    "k_samples": "k_samples",
    "max_iters": "max_iters",
    "lr_mu": "lr_mu",
    "lr_sigma": "lr_sigma",
    "lr_gamma": "lr_gamma",
    "grad_clip": "grad_clip",
    "tol_entropy": "tol_entropy",
    "max_sweeps": "max_sweeps",
    "gamma_threshold": "gamma_threshold",
    "estimate": "estimate",
}


def parse_alpha_grid(raw):
    try:
        return [float(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise CommandError(f"Invalid alpha grid {raw!r}: expected comma-separated numbers.", returncode=EXIT_BAD_INPUT)


def add_data_arguments(parser):
    parser.add_argument("--config", choices=sorted(PREDEFINED_CONFIGS), help="Named simulation configuration.")
    parser.add_argument("--n", type=int, help="Observations (with --p and --s instead of --config).")
    parser.add_argument("--p", type=int, help="Features.")
    parser.add_argument("--s", type=int, help="True signals.")


def add_solver_arguments(parser):
    parser.add_argument("--method", choices=METHODS)
    parser.add_argument("--lambda", dest="lam", type=float, help="Laplace slab rate (default 1).")
    parser.add_argument("--a0", type=float, help="Beta prior a0 (default 1).")
    parser.add_argument("--b0", type=float, help="Beta prior b0 (default p).")
    parser.add_argument("--k-samples", dest="k_samples", type=int, help="AlphaSVB Monte Carlo batch size K.")
    parser.add_argument("--iters", dest="max_iters", type=int, help="AlphaSVB iterations T.")
    parser.add_argument("--lr-mu", dest="lr_mu", type=float)
    parser.add_argument("--lr-sigma", dest="lr_sigma", type=float)
    parser.add_argument("--lr-gamma", dest="lr_gamma", type=float)
    parser.add_argument("--grad-clip", dest="grad_clip", type=float)
    parser.add_argument("--tol-entropy", dest="tol_entropy", type=float, help="AlphaVB stopping threshold on delta_H.")
    parser.add_argument("--max-sweeps", dest="max_sweeps", type=int)
    parser.add_argument("--gamma-threshold", dest="gamma_threshold", type=float)
    parser.add_argument("--estimate", choices=ESTIMATORS, help="Point estimator used for l2 error and MSPE.")


def solver_overrides(options) -> dict:
    return {field: options[dest] for dest, field in SOLVER_FLAGS.items() if options.get(dest) is not None}


def solver_settings(options) -> SolverSettings:
    values = solver_overrides(options)
    values.setdefault("gamma_threshold", settings.ALPHAVB_GAMMA_THRESHOLD)
    if not 0 < values["gamma_threshold"] < 1:
        raise CommandError("gamma threshold must lie strictly between 0 and 1.", returncode=EXIT_BAD_INPUT)
    try:
        return SolverSettings(**values)
    except (TypeError, AlphaVBError) as exc:
        raise CommandError(str(exc), returncode=EXIT_BAD_INPUT)


def format_validation_error(exc: serializers.ValidationError) -> str:
    detail = exc.detail
    if isinstance(detail, dict):
        return "; ".join(f"{key}: {' '.join(str(m) for m in msgs)}" for key, msgs in detail.items())
    return " ".join(str(m) for m in detail)


class BenchCommandBase(BaseCommand):
    """bench and sweep_alpha differ only in their default grid and the gnuplot file."""

    emit_gnuplot = False
    output_prefix = "bench"

    def default_alpha_grid(self, method):
        raise NotImplementedError

    def add_arguments(self, parser):
        parser.add_argument("--spec-file", dest="spec_file", help="JSON document with BenchSpec fields.")
        add_data_arguments(parser)
        add_solver_arguments(parser)
        parser.add_argument("--alpha", type=float, help="Single alpha value.")
        parser.add_argument("--alpha-grid", dest="alpha_grid", help="Comma-separated alpha values.")
        parser.add_argument("--repeats", type=int)
        parser.add_argument("--seed", type=int, help="Seed base: repeat r uses seed + r.")
        parser.add_argument("--jobs", type=int, help="Worker processes (default ALPHAVB_JOBS or core count).")
        parser.add_argument("--out", help="Long-format CSV path; the aggregate CSV is written next to it.")
        parser.add_argument(
            "--no-wall-time",
            dest="no_wall_time",
            action="store_true",
            help="Leave wall_ms empty so outputs are byte-comparable across runs.",
        )

    def _merged_spec_data(self, options) -> dict:
        data = {}
        if options.get("spec_file"):
            try:
                with open(options["spec_file"], encoding="utf-8") as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise CommandError(f"Cannot read spec file: {exc}", returncode=EXIT_BAD_INPUT)
            if not isinstance(data, dict):
                raise CommandError("Spec file must hold a JSON object.", returncode=EXIT_BAD_INPUT)

        # command line wins over the spec file
        flags = {
            "method": options.get("method"),
            "config_name": options.get("config"),
            "n": options.get("n"),
            "p": options.get("p"),
            "s": options.get("s"),
            "repeats": options.get("repeats"),
            "seed_base": options.get("seed"),
            "jobs": options.get("jobs"),
            "output_path": options.get("out"),
        }
        if options.get("alpha_grid"):
            flags["alpha_grid"] = parse_alpha_grid(options["alpha_grid"])
        elif options.get("alpha") is not None:
            flags["alpha_grid"] = [options["alpha"]]
        if options.get("no_wall_time"):
            flags["record_wall_time"] = False
        flags.update(solver_overrides(options))
        data.update({key: value for key, value in flags.items() if value is not None})
        if flags["config_name"] is not None:
            for key in ("n", "p", "s"):
                if flags[key] is None:
                    data.pop(key, None)
        data.setdefault("method", "alphavb")
        data.setdefault("gamma_threshold", settings.ALPHAVB_GAMMA_THRESHOLD)
        return data

    def handle(self, *args, **options):
        data = self._merged_spec_data(options)
        serializer = BenchSpecSerializer(data=data)
        try:
            serializer.is_valid(raise_exception=True)
        except serializers.ValidationError as exc:
            raise CommandError(format_validation_error(exc), returncode=EXIT_BAD_INPUT)

        method = serializer.validated_data["method"]
        label = serializer.validated_data.get("config_name") or "custom"
        output_path = Path(
            serializer.validated_data.get("output_path")
            or settings.ALPHAVB_OUTPUT_DIR / f"{self.output_prefix}_{method}_{label}.csv"
        )
        try:
            spec = serializer.to_spec(output_path, self.default_alpha_grid(method))
        except AlphaVBError as exc:
            raise CommandError(str(exc), returncode=EXIT_BAD_INPUT)

        jobs = serializer.validated_data.get("jobs") or settings.ALPHAVB_JOBS
        result = run_and_write(spec, jobs=jobs, gnuplot=self.emit_gnuplot)

        for kind, path in result["paths"].items():
            self.stdout.write(f"{kind}: {path}")
        if result["failed"]:
            self.stderr.write(f"{result['failed']} repeat(s) failed and were excluded from the aggregates")
        self.stdout.write(self.style.SUCCESS(f"{len(result['rows'])} fit(s) written"))
