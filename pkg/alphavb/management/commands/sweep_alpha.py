from alphavb.management.options import BenchCommandBase

FULL_GRID = [1.01, 1.1, 1.2, 1.3, 1.5, 2.0, 3.0, 5.0, 100.0]
SMALL_GRID = [0.01, 0.1, 0.25, 0.5, 0.9]


class Command(BenchCommandBase):
    help = (
        "Run the benchmark across an alpha grid and also emit a gnuplot data file "
        "(x = alpha, mean and sd per metric)."
    )

    emit_gnuplot = True
    output_prefix = "sweep"

    def default_alpha_grid(self, method):
        # AlphaVB needs alpha > 1; AlphaSVB defaults to the mass-covering side.
        return FULL_GRID if method == "alphavb" else SMALL_GRID
