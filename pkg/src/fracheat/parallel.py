"""Replication-level process pool with deterministic result order."""

from concurrent.futures import ProcessPoolExecutor
import os


def default_workers():
    return os.cpu_count() or 1


def map_blocks(fn, arg_tuples, workers=1):
    """[fn(*a) for a in arg_tuples], optionally spread over a process pool.

    Results come back in submission order, so reductions over them do not
    depend on the worker count.
    """
    arg_tuples = list(arg_tuples)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(arg_tuples) <= 1:
        return [fn(*a) for a in arg_tuples]
    with ProcessPoolExecutor(max_workers=min(workers, len(arg_tuples))) as pool:
        futures = [pool.submit(fn, *a) for a in arg_tuples]
        return [f.result() for f in futures]
