from .app import create_app
from .jobs import BatchJob, BatchState, JobStore, NotFound
from .pipeline import BatchProcessor, RESULT_TSV_HEADER
from .store import LocalFsStore

__all__ = [
    "create_app",
    "BatchJob",
    "BatchState",
    "JobStore",
    "NotFound",
    "BatchProcessor",
    "RESULT_TSV_HEADER",
    "LocalFsStore",
]
