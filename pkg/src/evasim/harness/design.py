"""Condition matrix and counterbalanced presentation orders."""

from __future__ import annotations

from dataclasses import dataclass

from ..agents import AgentCalibration, Interface, SubjectProfile, make_profiles


@dataclass(frozen=True)
class ConditionSpec:
    condition_id: int
    interface: Interface
    crosswalk: bool
    pedestrian_present: bool = True

    @property
    def scenario_label(self) -> str:
        if not self.pedestrian_present:
            return "no pedestrian"
        return "crosswalk" if self.crosswalk else "no crosswalk"


CONDITIONS = {
    1: ConditionSpec(1, Interface.MYO_ARMBAND, True),
    2: ConditionSpec(2, Interface.MYO_ARMBAND, False),
    3: ConditionSpec(3, Interface.STEERING_WHEEL, True),
    4: ConditionSpec(4, Interface.STEERING_WHEEL, False, pedestrian_present=False),
    5: ConditionSpec(5, Interface.STEERING_WHEEL, False),
    6: ConditionSpec(6, Interface.MANUAL_TAKEOVER, True),
    7: ConditionSpec(7, Interface.MANUAL_TAKEOVER, False),
}
AVOIDANCE_CONDITIONS = (1, 2, 3, 5, 6, 7)
FIXED_CONDITION = 4
FIXED_SLOT = 4  # 1-based position of the no-pedestrian drive


def latin_square(n: int) -> list[list[int]]:
    """``n`` x ``n`` Latin square over 1..n.

    Even ``n`` uses the Williams construction, so every ordered pair of
    neighbouring conditions occurs exactly once across rows. Odd ``n`` uses
    cyclic rows.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n % 2:
        return [[(r + c) % n + 1 for c in range(n)] for r in range(n)]
    first = [0]
    lo, hi = 1, n - 1
    while len(first) < n:
        first.append(lo)
        lo += 1
        if len(first) < n:
            first.append(hi)
            hi -= 1
    return [[(v + r) % n + 1 for v in first] for r in range(n)]


@dataclass(frozen=True)
class ExperimentPlan:
    subjects: tuple[SubjectProfile, ...]
    orders: tuple[tuple[int, ...], ...]
    master_seed: int

    def trials(self):
        """(subject, position, condition) in presentation order."""
        for subj, order in zip(self.subjects, self.orders):
            for pos, cid in enumerate(order, start=1):
                yield subj, pos, CONDITIONS[cid]


def build_plan(master_seed: int, n_subjects: int = 12, calib: AgentCalibration | None = None) -> ExperimentPlan:
    square = latin_square(len(AVOIDANCE_CONDITIONS))
    subjects = make_profiles(master_seed, n_subjects, calib)
    orders = []
    for i in range(n_subjects):
        row = [AVOIDANCE_CONDITIONS[k - 1] for k in square[i % len(square)]]
        row.insert(FIXED_SLOT - 1, FIXED_CONDITION)
        orders.append(tuple(row))
    return ExperimentPlan(tuple(subjects), tuple(orders), master_seed)
