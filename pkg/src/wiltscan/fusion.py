"""Multi-sensor feature groups and backward elimination over them."""
import json
import re
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import ConfigError, MissingModalityError, SchemaError
from .features import FeatureMatrix, FeatureTable
from .forest import ForestConfig
from .ml import cross_validate, make_folds

GROUP_NAMES = (
    "phantom_rgb", "inspire_rgb", "handheld_rgb", "thermal", "multispectral", "hyperspectral",
    "vi_multispectral", "vi_hyperspectral", "vi_rgb_based", "growth_stage",
)

GROWTH_STAGE_COLUMN = "growth_stage:ordinal"
MAX_V_STAGE = 20


@dataclass(frozen=True)
class FeatureGroup:
    name: str
    columns: tuple

    def __post_init__(self):
        if self.name not in GROUP_NAMES:
            raise ConfigError(f"unknown feature group {self.name!r}")
        if not self.columns:
            raise ConfigError(f"feature group {self.name!r} has no columns")
        object.__setattr__(self, "columns", tuple(self.columns))


def encode_growth_stage(stage):
    """Ordinal code on the V/R scale: VE=0, VC=1, V1..V20=2..21, R1..R8=22..29."""
    s = stage.strip().upper()
    if s == "VE":
        return 0
    if s == "VC":
        return 1
    m = re.fullmatch(r"([VR])(\d+)", s)
    if m:
        n = int(m.group(2))
        if m.group(1) == "V" and 1 <= n <= MAX_V_STAGE:
            return 1 + n
        if m.group(1) == "R" and 1 <= n <= 8:
            return 1 + MAX_V_STAGE + n
    raise SchemaError(f"unrecognised growth stage {stage!r}")


def groups_from_table(table, names):
    out = []
    for name in names:
        if name not in GROUP_NAMES:
            raise ConfigError(f"unknown feature group {name!r}")
        if name == "growth_stage":
            out.append(FeatureGroup(name, (GROWTH_STAGE_COLUMN,)))
            continue
        cols = table.group_columns(name)
        if not cols:
            raise MissingModalityError(f"no {name!r} features in the table")
        out.append(FeatureGroup(name, tuple(cols)))
    return out


def assemble_feature_groups(table, groups, include_growth_stage=False, labels=None):
    """Concatenate group columns in declared order (plus one ordinal growth-stage column)."""
    if groups and isinstance(groups[0], str):
        groups = groups_from_table(table, groups)
    names = [g.name for g in groups]
    if len(set(names)) != len(names):
        raise ConfigError("feature group names must be unique")
    blocks, columns = [], []
    for g in groups:
        if g.name == "growth_stage":
            continue
        block = table.matrix(list(g.columns)).values
        bad = np.flatnonzero(~np.isfinite(block).all(axis=1))
        if bad.size:
            i = int(bad[0])
            raise MissingModalityError(
                f"plot {table.plot_ids[i]} ({table.time_points[i]}) lacks {g.name!r} features"
            )
        blocks.append(block)
        columns.extend(g.columns)
    if include_growth_stage or "growth_stage" in names:
        blocks.append(np.array([[encode_growth_stage(s)] for s in table.growth_stages], dtype=float))
        columns.append(GROWTH_STAGE_COLUMN)
    values = np.hstack(blocks) if blocks else np.zeros((len(table), 0))
    return FeatureMatrix(values, columns, labels, list(table.plot_ids))


@dataclass
class EliminationStep:
    removed: str
    accuracy: float
    candidates: dict


@dataclass
class EliminationTrace:
    initial_groups: List[str]
    initial_accuracy: float
    steps: List[EliminationStep]
    final_groups: List[str]
    final_accuracy: float
    strict: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "acceptance": "strict" if self.strict else "non-strict",
            "initial_groups": self.initial_groups,
            "initial_accuracy": self.initial_accuracy,
            "steps": [
                {"removed": s.removed, "accuracy": s.accuracy, "candidates": s.candidates}
                for s in self.steps
            ],
            "final_groups": self.final_groups,
            "final_accuracy": self.final_accuracy,
            **self.extra,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def table(self):
        lines = [f"{'step':>4}  {'removed':<18} {'accuracy':>8}  groups"]
        groups = list(self.initial_groups)
        lines.append(f"{0:>4}  {'-':<18} {self.initial_accuracy:>8.4f}  {','.join(groups)}")
        for k, s in enumerate(self.steps, start=1):
            groups.remove(s.removed)
            lines.append(f"{k:>4}  {s.removed:<18} {s.accuracy:>8.4f}  {','.join(groups)}")
        return "\n".join(lines)


def backward_eliminate(matrix, groups, labels=None, forest=ForestConfig(), cv_k=5,
                       strict=True):
    """Greedily drop whole feature groups while cross-validated accuracy improves.

    ``groups`` lists FeatureGroups whose columns exist in ``matrix``. All
    evaluations share one fold partition. With ``strict`` a removal must raise
    accuracy; otherwise ties are accepted too.
    """
    if len(groups) < 2:
        raise ConfigError("backward elimination needs at least two groups")
    labels = np.asarray(matrix.labels if labels is None else labels)
    folds = make_folds(labels, cv_k, forest.seed)
    cache = {}

    def evaluate(names):
        key = tuple(names)
        if key not in cache:
            cols = [c for g in groups if g.name in names for c in g.columns]
            cache[key] = cross_validate(matrix.columns(cols), labels, config=forest,
                                        folds=folds).mean_accuracy
        return cache[key]

    current = [g.name for g in groups]
    acc = evaluate(current)
    initial = acc
    steps = []
    while len(current) > 1:
        candidates = {}
        for name in current:
            candidates[name] = evaluate([n for n in current if n != name])
        removed = max(current, key=lambda n: (candidates[n], -current.index(n)))
        best = candidates[removed]
        if best > acc or (not strict and best == acc):
            steps.append(EliminationStep(removed, best, candidates))
            current = [n for n in current if n != removed]
            acc = best
        else:
            break
    return EliminationTrace([g.name for g in groups], initial, steps, current, acc, strict)
