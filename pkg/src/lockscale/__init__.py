"""Lock-scalability toolkit.

Closed-form contention model (`model`), discrete-event validator
(`sim`), synchronization primitives (`locks`), real-thread benchmark
harness (`bench`), curve fitter (`fit`), and a CLI (`cli`).
"""

__version__ = "0.1.0"

from . import bench, fit, locks, model, sim  # noqa: F401

__all__ = ["model", "sim", "locks", "bench", "fit", "__version__"]
