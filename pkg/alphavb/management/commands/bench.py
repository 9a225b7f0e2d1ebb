from alphavb.management.options import BenchCommandBase

DEFAULT_ALPHA = {"alphavb": 1.01, "alphasvb": 0.9}


class Command(BenchCommandBase):
    help = "Repeat simulate/fit/evaluate for one method and write long-format and aggregate CSVs."

    output_prefix = "bench"

    def default_alpha_grid(self, method):
        return [DEFAULT_ALPHA[method]]
