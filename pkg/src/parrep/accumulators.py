"""
Run accumulators, exit events and the optional event trace
"""
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd


@dataclass
class Accumulators:
    """Simulation clock, wall clock, observable sums and event counters"""

    f_sim: Dict[str, float] = field(default_factory=dict)
    t_sim: int = 0
    wall_clock: int = 0
    n_decorr_steps: int = 0
    n_parallel_steps: int = 0
    n_parallel_loops: int = 0
    n_dephasings: int = 0
    dephasing_work: int = 0

    def add_f(self, contributions: Dict[str, float]):
        for name, value in contributions.items():
            self.f_sim[name] = self.f_sim.get(name, 0.0) + value

    def estimates(self) -> Dict[str, float]:
        """f_sim / T_sim per observable"""
        if self.t_sim == 0:
            return {name: float('nan') for name in self.f_sim}
        return {name: total / self.t_sim for name, total in self.f_sim.items()}


@dataclass
class ExitEvent:
    """Accelerated exit produced by one parallel step"""

    tau_acc: int
    x_acc: int
    f_contrib: Dict[str, float]
    loops: int
    replica: int


@dataclass
class TraceRecord:
    """One phase of a run"""

    phase: str
    t_sim_increment: int
    wall_increment: int
    set_id: Optional[str]
    contribution: Dict[str, float]
    loops: int = 0
    work: int = 0


class EventTrace:
    """Ordered phase records; off by default in production runs"""

    def __init__(self):
        self.records: List[TraceRecord] = []

    def append(self, record: TraceRecord):
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def to_frame(self) -> pd.DataFrame:
        """One row per record; contributions flattened to `f_<name>` columns"""
        rows = []
        for record in self.records:
            row = asdict(record)
            for name, value in row.pop('contribution').items():
                row[f'f_{name}'] = value
            rows.append(row)
        return pd.DataFrame(rows)

    def write_jsonl(self, path: Union[str, Path]):
        """Write line-delimited JSON records"""
        self.to_frame().to_json(path, orient='records', lines=True)

    def totals(self) -> Dict[str, int]:
        """T_sim and wall-clock sums over all records"""
        return {
            't_sim': sum(r.t_sim_increment for r in self.records),
            'wall_clock': sum(r.wall_increment for r in self.records),
        }
