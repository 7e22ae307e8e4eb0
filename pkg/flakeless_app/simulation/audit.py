"""
Exact audit of issued identifiers.

- duplicates: total minus distinct, via np.unique over every issued ID
- monotonicity: each incarnation's stream must strictly increase
- cross-incarnation: on a reused IP, a later incarnation's first ID must be
  above the previous incarnation's last ID
"""

from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np


@dataclass
class IssuanceStream:
    """IDs issued by one node incarnation, in issuance order."""
    node: str
    ids: Sequence[int]
    source_ip: Optional[str] = None
    started_ms: int = 0


@dataclass(frozen=True)
class AuditSummary:
    total_ids: int
    distinct_ids: int
    duplicate_count: int
    monotonicity_violations: int
    cross_incarnation_violations: int
    max_ids_in_one_ms: int

    @property
    def clean(self) -> bool:
        return not (self.duplicate_count or self.monotonicity_violations
                    or self.cross_incarnation_violations)


def _as_array(ids: Sequence[int]) -> np.ndarray:
    if isinstance(ids, np.ndarray):
        return ids.astype(np.uint64, copy=False)
    return np.asarray(ids, dtype=np.uint64)


def count_duplicates(arrays: Iterable[np.ndarray]) -> (int, int):
    """Return (total, distinct) across all arrays."""
    arrays = [a for a in arrays if a.size]
    if not arrays:
        return 0, 0
    merged = np.concatenate(arrays)
    return int(merged.size), int(np.unique(merged).size)


def audit_ids(streams: Sequence[IssuanceStream], timestamp_shift: int = 22) -> AuditSummary:
    arrays = [_as_array(s.ids) for s in streams]
    total, distinct = count_duplicates(arrays)

    monotonicity = 0
    busiest_ms = 0
    for arr in arrays:
        if arr.size > 1:
            # IDs are below 2**63, so signed differences are exact
            monotonicity += int(np.count_nonzero(np.diff(arr.astype(np.int64)) <= 0))
        if arr.size:
            _, counts = np.unique(arr >> np.uint64(timestamp_shift), return_counts=True)
            busiest_ms = max(busiest_ms, int(counts.max()))

    by_ip: Dict[str, List[int]] = defaultdict(list)
    for index, stream in enumerate(streams):
        if stream.source_ip is not None and arrays[index].size:
            by_ip[stream.source_ip].append(index)

    cross = 0
    for indices in by_ip.values():
        indices.sort(key=lambda i: streams[i].started_ms)
        for earlier, later in zip(indices, indices[1:]):
            if arrays[later][0] <= arrays[earlier][-1]:
                cross += 1

    return AuditSummary(
        total_ids=total,
        distinct_ids=distinct,
        duplicate_count=total - distinct,
        monotonicity_violations=monotonicity,
        cross_incarnation_violations=cross,
        max_ids_in_one_ms=busiest_ms,
    )
