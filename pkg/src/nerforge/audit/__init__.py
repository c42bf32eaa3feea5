from .loop import (
    AuditLoop,
    IterationReport,
    check_convergence,
    enqueue_conflicts,
    merge_resolved,
    run_iteration,
)
from .service import AuditApiServer, run_in_thread, serve_audit_api
from .store import (
    AlreadyResolvedError,
    AuditError,
    AuditItem,
    AuditStore,
    DuplicateAuditorError,
    InvalidTagsError,
    UnknownItemError,
    VersionConflictError,
)

__all__ = [
    "AlreadyResolvedError",
    "AuditApiServer",
    "AuditError",
    "AuditItem",
    "AuditLoop",
    "AuditStore",
    "DuplicateAuditorError",
    "InvalidTagsError",
    "IterationReport",
    "UnknownItemError",
    "VersionConflictError",
    "check_convergence",
    "enqueue_conflicts",
    "merge_resolved",
    "run_in_thread",
    "run_iteration",
    "serve_audit_api",
]
