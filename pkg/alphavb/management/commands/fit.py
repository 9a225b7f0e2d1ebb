from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from rest_framework.renderers import JSONRenderer

from alphavb.bench import SOLVER_SEED_OFFSET, fit_instance
from alphavb.exceptions import AlphaVBError
from alphavb.management.commands.bench import DEFAULT_ALPHA
from alphavb.management.options import (
    EXIT_BAD_INPUT,
    EXIT_DIVERGED,
    add_data_arguments,
    add_solver_arguments,
    solver_settings,
)
from alphavb.metrics import evaluate, select
from alphavb.serializers import FitResultSerializer
from alphavb.simgen import SimConfig, generate, predefined_config, read_instance


class Command(BaseCommand):
    help = "Fit AlphaVB or AlphaSVB on a simulated configuration or a CSV directory and print the fit as JSON."

    def add_arguments(self, parser):
        add_data_arguments(parser)
        add_solver_arguments(parser)
        parser.add_argument("--data", help="Directory with X.csv and Y.csv (theta.csv, X_test.csv, Y_test.csv optional).")
        parser.add_argument("--alpha", type=float, help="Divergence order (default 1.01 for alphavb, 0.9 for alphasvb).")
        parser.add_argument("--seed", type=int, default=42, help="Data seed for simulated input.")
        parser.add_argument("--out", help="Write the JSON document here instead of stdout.")

    def _load_instance(self, options):
        if options.get("data"):
            try:
                return read_instance(options["data"])
            except OSError as exc:
                raise CommandError(f"Cannot read data directory: {exc}", returncode=EXIT_BAD_INPUT)
            except ValueError as exc:
                # AlphaVBError (shape, non-finite input) or a malformed CSV
                raise CommandError(str(exc), returncode=EXIT_BAD_INPUT)
        try:
            if options.get("config"):
                config = predefined_config(options["config"], options["seed"])
            elif None not in (options.get("n"), options.get("p"), options.get("s")):
                config = SimConfig(n=options["n"], p=options["p"], s=options["s"], seed=options["seed"])
            else:
                raise CommandError("Give --data, --config, or all of --n --p --s.", returncode=EXIT_BAD_INPUT)
            return generate(config)
        except AlphaVBError as exc:
            raise CommandError(str(exc), returncode=EXIT_BAD_INPUT)

    def handle(self, *args, **options):
        method = options.get("method") or "alphavb"
        alpha = options["alpha"] if options.get("alpha") is not None else DEFAULT_ALPHA[method]
        solver = solver_settings(options)
        instance = self._load_instance(options)

        try:
            outcome = fit_instance(
                method, instance.train, alpha, solver, solver_seed=options["seed"] + SOLVER_SEED_OFFSET
            )
        except AlphaVBError as exc:
            raise CommandError(str(exc), returncode=EXIT_BAD_INPUT)
        if outcome.diverged:
            raise CommandError("diverged", returncode=EXIT_DIVERGED)

        bundle = None
        if instance.theta_true is not None:
            bundle = evaluate(outcome.params, instance, threshold=solver.gamma_threshold, estimate=solver.estimate)
        selected = select(outcome.params, solver.gamma_threshold).tolist()
        document = JSONRenderer().render(FitResultSerializer.from_outcome(outcome, selected, bundle).data)

        if options.get("out"):
            path = Path(options["out"])
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(document + b"\n")
            self.stderr.write(f"fit written to {path}")
        else:
            self.stdout.write(document.decode("utf-8"))
