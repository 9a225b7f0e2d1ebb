from rest_framework import serializers

from .bench import METHODS, BenchSpec, SolverSettings
from .metrics import ESTIMATORS
from .simgen import PREDEFINED_CONFIGS


class MetricBundleSerializer(serializers.Serializer):
    l2_error = serializers.FloatField(min_value=0)
    fdr = serializers.FloatField(min_value=0, max_value=1)
    tpr = serializers.FloatField(min_value=0, max_value=1)
    mspe = serializers.FloatField(min_value=0)


class FitResultSerializer(serializers.Serializer):
    method = serializers.ChoiceField(choices=METHODS)
    alpha = serializers.FloatField()
    mu = serializers.ListField(child=serializers.FloatField())
    sigma = serializers.ListField(child=serializers.FloatField())
    gamma = serializers.ListField(child=serializers.FloatField())
    selected = serializers.ListField(child=serializers.IntegerField(min_value=0))
    metrics = MetricBundleSerializer(allow_null=True)
    wall_time_ms = serializers.FloatField(min_value=0)
    converged = serializers.BooleanField()
    sweeps = serializers.IntegerField(allow_null=True, required=False)
    trace = serializers.ListField(child=serializers.FloatField(), required=False)

    @classmethod
    def from_outcome(cls, outcome, selected, bundle=None):
        params = outcome.params
        return cls(
            {
                "method": outcome.method,
                "alpha": outcome.alpha,
                "mu": params.mu.tolist(),
                "sigma": params.sigma.tolist(),
                "gamma": params.gamma.tolist(),
                "selected": list(selected),
                "metrics": bundle.as_dict() if bundle is not None else None,
                "wall_time_ms": outcome.wall_time_ms,
                "converged": outcome.converged,
                "sweeps": outcome.sweeps,
                "trace": outcome.trace,
            }
        )


class BenchSpecSerializer(serializers.Serializer):
    """Validates a JSON benchmark spec file; every field is optional so flags can fill the rest."""

    method = serializers.ChoiceField(choices=METHODS, required=False)
    config_name = serializers.ChoiceField(choices=sorted(PREDEFINED_CONFIGS), required=False, allow_null=True)
    n = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    p = serializers.IntegerField(min_value=1, required=False, allow_null=True)
    s = serializers.IntegerField(min_value=0, required=False, allow_null=True)
    alpha_grid = serializers.ListField(
        child=serializers.FloatField(min_value=0), allow_empty=False, required=False
    )
    repeats = serializers.IntegerField(min_value=1, required=False)
    seed_base = serializers.IntegerField(required=False)
    jobs = serializers.IntegerField(min_value=1, required=False)
    output_path = serializers.CharField(required=False)
    lam = serializers.FloatField(required=False)
    a0 = serializers.FloatField(required=False, allow_null=True)
    b0 = serializers.FloatField(required=False, allow_null=True)
    k_samples = serializers.IntegerField(min_value=1, required=False)
    max_iters = serializers.IntegerField(min_value=0, required=False)
    lr_mu = serializers.FloatField(min_value=0, required=False)
    lr_sigma = serializers.FloatField(min_value=0, required=False)
    lr_gamma = serializers.FloatField(min_value=0, required=False)
    grad_clip = serializers.FloatField(required=False)
    tol_entropy = serializers.FloatField(required=False)
    max_sweeps = serializers.IntegerField(min_value=1, required=False)
    gamma_threshold = serializers.FloatField(required=False)
    estimate = serializers.ChoiceField(choices=ESTIMATORS, required=False)
    record_wall_time = serializers.BooleanField(required=False)

    def validate_alpha_grid(self, value):
        if any(a == 1 for a in value):
            raise serializers.ValidationError("alpha = 1 is not a Renyi order; use a value on either side.")
        return value

    def validate_gamma_threshold(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError("gamma threshold must lie strictly between 0 and 1.")
        return value

    def validate(self, attrs):
        method = attrs.get("method")
        grid = attrs.get("alpha_grid") or []
        if method == "alphavb" and any(a <= 1 for a in grid):
            raise serializers.ValidationError({"alpha_grid": "cavi requires alpha > 1"})
        if attrs.get("config_name") is None and None not in (attrs.get("n"), attrs.get("p"), attrs.get("s")):
            if attrs["s"] > attrs["p"]:
                raise serializers.ValidationError({"s": "invalid sparsity: s must not exceed p"})
        return attrs

    def to_spec(self, output_path, default_alpha_grid) -> BenchSpec:
        data = self.validated_data
        solver_fields = {
            name: data[name] for name in SolverSettings.__dataclass_fields__ if name in data
        }
        return BenchSpec(
            method=data.get("method", "alphavb"),
            alpha_grid=tuple(data.get("alpha_grid") or default_alpha_grid),
            repeats=data.get("repeats", 100),
            seed_base=data.get("seed_base", 1),
            config_name=data.get("config_name"),
            n=data.get("n"),
            p=data.get("p"),
            s=data.get("s"),
            output_path=output_path,
            solver=SolverSettings(**solver_fields),
            record_wall_time=data.get("record_wall_time", True),
        )
