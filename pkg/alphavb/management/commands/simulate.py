from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from alphavb.exceptions import AlphaVBError
from alphavb.management.options import EXIT_BAD_INPUT, add_data_arguments
from alphavb.simgen import SimConfig, generate, predefined_config, write_instance


class Command(BaseCommand):
    help = "Draw one simulated dataset and write it as X.csv, Y.csv, theta.csv, X_test.csv, Y_test.csv."

    def add_arguments(self, parser):
        add_data_arguments(parser)
        parser.add_argument("--seed", type=int, default=42)
        parser.add_argument("--test-n", dest="test_n", type=int, help="Held-out rows (default n).")
        parser.add_argument("--out", help="Output directory.")

    def handle(self, *args, **options):
        try:
            if options.get("config"):
                base = predefined_config(options["config"], options["seed"])
                config = SimConfig(
                    n=base.n, p=base.p, s=base.s, seed=base.seed, test_n=options.get("test_n"), name=base.name
                )
            elif None not in (options.get("n"), options.get("p"), options.get("s")):
                config = SimConfig(
                    n=options["n"], p=options["p"], s=options["s"], seed=options["seed"], test_n=options.get("test_n")
                )
            else:
                raise CommandError("Give --config or all of --n --p --s.", returncode=EXIT_BAD_INPUT)
            instance = generate(config)
        except AlphaVBError as exc:
            raise CommandError(str(exc), returncode=EXIT_BAD_INPUT)

        directory = options.get("out") or settings.ALPHAVB_OUTPUT_DIR / f"sim_{config.label}_seed{config.seed}"
        write_instance(instance, directory)
        self.stdout.write(self.style.SUCCESS(f"Simulated {config.label} written to {directory}"))
