from functools import lru_cache

from taylor.services import experiment


@lru_cache(maxsize=None)
def bundled_result(name: str) -> experiment.ExperimentResult:
    """Full in-memory run of a bundled example, shared across test modules."""
    return experiment.run_experiment(experiment.load_config(name))
