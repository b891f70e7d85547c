"""Console output and thread-pool fan-out for sweeps"""

from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Optional, Sequence, TypeVar

from tqdm import tqdm

from hlab.config import SETTINGS

T = TypeVar("T")
R = TypeVar("R")

_active_bars = 0


def say(message: str) -> None:
    """Print a line without breaking an active progress bar."""
    if _active_bars:
        tqdm.write(message)
    else:
        print(message)


def warn(message: str) -> None:
    """Print a soft warning; nothing is raised."""
    say(f"⚠ Warning: {message}")


def parallel_map(
    func: Callable[[T], R],
    items: Sequence[T],
    desc: Optional[str] = None,
    max_workers: Optional[int] = None,
) -> list[R]:
    """Run func over items on a thread pool and return results in input order.

    numpy releases the GIL inside LAPACK/FFT calls, so threads give real
    speedups for the dense kernels used here. The reduction order never
    depends on completion order.
    """
    global _active_bars
    items = list(items)
    if not items:
        return []
    workers = max_workers if max_workers is not None else SETTINGS.threads
    workers = min(workers, max(1, len(items)))
    if workers == 1 and (desc is None or not SETTINGS.progress):
        return [func(item) for item in items]

    results: list = [None] * len(items)
    progress_bar = None
    if desc and SETTINGS.progress:
        progress_bar = tqdm(total=len(items), desc=desc, ncols=80, leave=False)
        _active_bars += 1
    try:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            futures = {ex.submit(func, item): idx for idx, item in enumerate(items)}
            for fut in as_completed(futures):
                results[futures[fut]] = fut.result()
                if progress_bar is not None:
                    progress_bar.update(1)
    finally:
        if progress_bar is not None:
            progress_bar.close()
            _active_bars -= 1
    return results
