import pytest

from cantor_rgg.model import ExperimentConfig, Target
from cantor_rgg.params import make_params


class BaseTestClass:
    @pytest.fixture
    def params(self):
        return make_params("1/3")

    @pytest.fixture(params=["1/4", "1/3", "2/5"])
    def any_params(self, request):
        return make_params(request.param)

    @pytest.fixture
    def small_config(self, params):
        return ExperimentConfig(
            params=params,
            n_grid=(8, 16, 32),
            replicates=400,
            master_seed=7,
            targets=tuple(Target),
        )
