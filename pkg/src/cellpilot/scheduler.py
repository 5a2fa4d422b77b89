"""Per-cell bandwidth allocation and network throughput aggregation.

Without rate caps every ACTIVE UE on a cell gets an equal bandwidth
share. With caps the allocator runs resource-fair water-filling: UEs
whose cap needs less than the current fair share are pinned to exactly
their cap's bandwidth and the surplus is re-split equally among the
rest, iterated to a fixpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Allocation:
    ue_ids: list[int]
    bandwidth: np.ndarray        # Hz per UE, aligned with ue_ids
    throughput: np.ndarray       # bit/s per UE
    cell_throughput: float       # bit/s
    available_bw: float          # Hz left unallocated

    @classmethod
    def empty(cls, cell_bw: float) -> "Allocation":
        return cls([], np.zeros(0), np.zeros(0), 0.0, float(cell_bw))


def allocate(cell_bw: float, ue_ids: list[int], se: np.ndarray,
             rate_caps: np.ndarray | None = None) -> Allocation:
    """Allocate `cell_bw` Hz among the ACTIVE UEs with the given spectral
    efficiencies; throughput_ue = bandwidth_ue * se_ue always."""
    n = len(ue_ids)
    if n == 0:
        return Allocation.empty(cell_bw)
    se = np.asarray(se, dtype=float)
    if rate_caps is None:
        bw = np.full(n, cell_bw / n)
    else:
        caps = np.asarray(rate_caps, dtype=float)
        # bandwidth each UE needs to reach its cap; se=0 can never cap
        with np.errstate(divide="ignore"):
            need = np.where(se > 0.0, caps / np.where(se > 0.0, se, 1.0), np.inf)
        bw = np.zeros(n)
        free = np.ones(n, dtype=bool)
        budget = float(cell_bw)
        while True:
            share = budget / free.sum()
            newly = free & (need < share)
            if not newly.any():
                bw[free] = share
                break
            bw[newly] = need[newly]
            budget -= float(need[newly].sum())
            free &= ~newly
            if not free.any():
                break
    tput = bw * se
    return Allocation(list(ue_ids), bw, tput, float(tput.sum()),
                      float(cell_bw - bw.sum()))


def network_throughput(allocs: list[Allocation]) -> tuple[float, np.ndarray, float, float]:
    """(total, per_cell, per_ue_mean, per_cell_std) across the cell set.

    per_ue_mean averages over ACTIVE UEs only and is 0 when none are
    active; the std is the population standard deviation over all cells,
    idle cells contributing zeros.
    """
    per_cell = np.array([a.cell_throughput for a in allocs], dtype=float)
    total = float(per_cell.sum())
    n_active = sum(len(a.ue_ids) for a in allocs)
    per_ue_mean = total / n_active if n_active else 0.0
    return total, per_cell, per_ue_mean, float(per_cell.std())
