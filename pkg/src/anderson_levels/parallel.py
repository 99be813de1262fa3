"""Index-ordered parallel map over realizations.

Workers may finish in any order; results are always returned sorted by
realization index, so downstream reductions are bit-identical for any
worker count.
"""

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "ANDERSON_LEVELS_WORKERS"


def resolve_workers(workers=None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return int(workers)


class RealizationError(RuntimeError):
    """A single realization failed; carries what is needed to replay it."""

    def __init__(self, realization_index, seed, cause):
        self.realization_index = realization_index
        self.seed = seed
        self.cause = cause if isinstance(cause, str) else repr(cause)
        super().__init__(f"realization {realization_index} (seed={seed}) failed: {self.cause}")

    def __reduce__(self):
        # keep the replay information when crossing process boundaries
        return (RealizationError, (self.realization_index, self.seed, self.cause))


class _Guarded:
    def __init__(self, fn, seed):
        self.fn = fn
        self.seed = seed

    def __call__(self, index):
        try:
            return self.fn(index)
        except RealizationError:
            raise
        except Exception as exc:
            raise RealizationError(index, self.seed, exc) from exc


def map_realizations(fn, indices, workers=None, seed=None, chunksize=None):
    """Apply ``fn`` to each realization index and return results in index order.

    ``fn`` must be picklable when ``workers > 1``.
    """
    indices = sorted(int(i) for i in indices)
    workers = resolve_workers(workers)
    guarded = _Guarded(fn, seed)
    if workers == 1 or len(indices) <= 1:
        return [guarded(i) for i in indices]
    if chunksize is None:
        chunksize = max(1, len(indices) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(guarded, indices, chunksize=chunksize))
    return results
