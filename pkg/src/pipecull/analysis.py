"""Rank-based comparison of experimental settings.

Settings are ranked per dataset (rank 1 best, ties averaged), the
Friedman test checks whether the settings differ at all, and the Nemenyi
critical difference separates pairs.  Critical values ship as bundled
data tables, so no statistics dependency is needed at run time.
"""

from __future__ import annotations

import csv
import functools
import importlib.resources
import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .ranking import tie_averaged_ranks


class AnalysisError(ValueError):
    """Inputs outside the supported shape or table range."""


@dataclass
class ErrorTable:
    """Best achieved error per (setting, dataset); None marks an absence."""

    settings: tuple[str, ...]
    datasets: tuple[str, ...]
    cells: dict[tuple[str, str], float | None]

    def __post_init__(self) -> None:
        if len(set(self.settings)) != len(self.settings):
            raise AnalysisError("duplicate settings")
        if len(set(self.datasets)) != len(self.datasets):
            raise AnalysisError("duplicate datasets")
        for s in self.settings:
            for d in self.datasets:
                self.cells.setdefault((s, d), None)

    def column(self, dataset: str) -> list[float | None]:
        return [self.cells[(s, dataset)] for s in self.settings]


@dataclass
class RankMatrix:
    """Per-dataset tie-averaged ranks over settings, plus averages."""

    settings: tuple[str, ...]
    datasets: tuple[str, ...]
    ranks: dict[tuple[str, str], float]
    averages: dict[str, float]
    dropped_datasets: tuple[str, ...] = ()

    def ranks_for(self, setting: str) -> list[float]:
        return [self.ranks[(setting, d)] for d in self.datasets]


@dataclass(frozen=True)
class FriedmanResult:
    statistic: float
    df: int
    critical_value: float | None
    significant: bool | None
    n_datasets: int
    n_settings: int


@dataclass(frozen=True)
class PairwiseComparison:
    setting_a: str
    setting_b: str
    rank_difference: float
    critical: bool


@dataclass(frozen=True)
class HierarchyCheck:
    relation: str
    lhs: float | None
    rhs: float | None
    satisfied: bool | None


def _load_table(resource: str) -> dict[int, float]:
    text = importlib.resources.files("pipecull.data").joinpath(resource) \
        .read_text(encoding="utf-8")
    out: dict[int, float] = {}
    for row in csv.reader(text.splitlines()):
        if not row or row[0].startswith("#") or not row[0].strip().isdigit():
            continue
        out[int(row[0])] = float(row[1])
    return out


@functools.cache
def _nemenyi_q() -> dict[int, float]:
    return _load_table("nemenyi_q_alpha05.csv")


@functools.cache
def _chi2_crit() -> dict[int, float]:
    return _load_table("chi_square_crit_alpha05.csv")


def rank_settings(table: ErrorTable) -> RankMatrix:
    """Rank settings within each dataset column.

    Datasets where any setting is absent are dropped entirely, so every
    retained column ranks the full set of settings and column sums equal
    s(s+1)/2.
    """
    if not table.settings:
        raise AnalysisError("no settings to rank")
    kept: list[str] = []
    dropped: list[str] = []
    for d in table.datasets:
        col = table.column(d)
        (dropped if any(v is None for v in col) else kept).append(d)
    if not kept:
        raise AnalysisError("every dataset has at least one absent setting")
    ranks: dict[tuple[str, str], float] = {}
    for d in kept:
        col_ranks = tie_averaged_ranks([table.cells[(s, d)]
                                        for s in table.settings])
        for s, r in zip(table.settings, col_ranks):
            ranks[(s, d)] = r
    averages = {
        s: sum(ranks[(s, d)] for d in kept) / len(kept)
        for s in table.settings
    }
    return RankMatrix(table.settings, tuple(kept), ranks, averages,
                      tuple(dropped))


def friedman(matrix: RankMatrix) -> FriedmanResult:
    """Friedman chi-square from mean ranks.

    The mean-rank form sums (avg rank)^2 - s(s+1)^2/4, which is exactly
    zero when every column ties completely.  Significance is judged
    against the bundled 5% chi-square table when the df is covered.
    """
    s = len(matrix.settings)
    n = len(matrix.datasets)
    if s < 3:
        raise AnalysisError("Friedman test needs at least 3 settings")
    if n < 2:
        raise AnalysisError("Friedman test needs at least 2 datasets")
    mean_sq = sum(matrix.averages[st] ** 2 for st in matrix.settings)
    statistic = 12.0 * n / (s * (s + 1)) * (mean_sq - s * (s + 1) ** 2 / 4.0)
    df = s - 1
    crit = _chi2_crit().get(df)
    significant = None if crit is None else statistic > crit
    return FriedmanResult(statistic, df, crit, significant, n, s)


def max_friedman_statistic(n_settings: int, n_datasets: int) -> float:
    """The statistic under perfect agreement across datasets."""
    return n_datasets * (n_settings - 1)


def nemenyi_cd(n_settings: int, n_datasets: int, alpha: float = 0.05) -> float:
    """Critical difference in average rank for the Nemenyi test."""
    if alpha != 0.05:
        raise AnalysisError("only alpha=0.05 critical values are bundled")
    q = _nemenyi_q().get(n_settings)
    if q is None:
        raise AnalysisError(
            f"no critical value for {n_settings} settings (bundled range "
            f"{min(_nemenyi_q())}..{max(_nemenyi_q())})")
    if n_datasets < 1:
        raise AnalysisError("need at least one dataset")
    return q * math.sqrt(n_settings * (n_settings + 1) / (6.0 * n_datasets))


def pairwise_critical(matrix: RankMatrix,
                      cd: float | None = None) -> list[PairwiseComparison]:
    """All setting pairs with their average-rank gap versus the CD."""
    if cd is None:
        cd = nemenyi_cd(len(matrix.settings), len(matrix.datasets))
    out = []
    for i, a in enumerate(matrix.settings):
        for b in matrix.settings[i + 1:]:
            diff = abs(matrix.averages[a] - matrix.averages[b])
            out.append(PairwiseComparison(a, b, diff, diff > cd))
    return out


_FAMILY_CHAIN = (("baseline", "r30"), ("baseline", "avatar"),
                 ("avatar", "M"), ("M", "L"), ("L", "O"))


def family_averages(matrix: RankMatrix) -> dict[str, float | None]:
    """Average rank per scenario family; culling families pool their k."""
    groups: dict[str, list[float]] = {}
    for s in matrix.settings:
        if s in ("baseline", "avatar", "r30"):
            fam = s
        elif "-" in s and s.split("-", 1)[0] in ("M", "L", "O"):
            fam = s.split("-", 1)[0]
        else:
            continue
        groups.setdefault(fam, []).append(matrix.averages[s])
    return {fam: sum(v) / len(v) for fam, v in groups.items()}


def hierarchy_report(families: Mapping[str, float | None]
                     ) -> list[HierarchyCheck]:
    """Strict expected orderings between families (higher rank is worse)."""
    out = []
    for worse, better in _FAMILY_CHAIN:
        lhs = families.get(worse)
        rhs = families.get(better)
        if lhs is None or rhs is None:
            out.append(HierarchyCheck(f"{worse}>{better}", lhs, rhs, None))
        else:
            out.append(HierarchyCheck(f"{worse}>{better}", lhs, rhs, lhs > rhs))
    return out


def metric_k(per_dataset_best: Mapping[str, str],
             culled: Mapping[int, Mapping[str, Sequence[str]]]) -> dict[int, int]:
    """How often the per-dataset best predictor survives culling, by k.

    ``per_dataset_best`` maps dataset -> the reference best predictor;
    ``culled[k][dataset]`` is the keep-set used at that k.
    """
    out: dict[int, int] = {}
    for k in sorted(culled):
        hits = 0
        for ds, best in per_dataset_best.items():
            keep = culled[k].get(ds, ())
            if best in keep:
                hits += 1
        out[k] = hits
    return out


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def export_error_table(table: ErrorTable, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["setting"] + list(table.datasets))
        for s in table.settings:
            w.writerow([s] + [_fmt(table.cells[(s, d)]) for d in table.datasets])


def load_error_table(path: str) -> ErrorTable:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise AnalysisError(f"{path}: empty table")
    datasets = tuple(rows[0][1:])
    settings = tuple(r[0] for r in rows[1:])
    cells: dict[tuple[str, str], float | None] = {}
    for r in rows[1:]:
        for d, cell in zip(datasets, r[1:]):
            cells[(r[0], d)] = None if cell == "" else float(cell)
    return ErrorTable(settings, datasets, cells)


def export_rank_matrix(matrix: RankMatrix, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["setting"] + list(matrix.datasets) + ["average"])
        for s in matrix.settings:
            w.writerow([s] + [_fmt(matrix.ranks[(s, d)])
                              for d in matrix.datasets]
                       + [_fmt(matrix.averages[s])])


def load_rank_matrix(path: str) -> RankMatrix:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1] != "average":
        raise AnalysisError(f"{path}: not a rank matrix file")
    datasets = tuple(rows[0][1:-1])
    settings = tuple(r[0] for r in rows[1:])
    ranks: dict[tuple[str, str], float] = {}
    averages: dict[str, float] = {}
    for r in rows[1:]:
        for d, cell in zip(datasets, r[1:-1]):
            ranks[(r[0], d)] = float(cell)
        averages[r[0]] = float(r[-1])
    return RankMatrix(settings, datasets, ranks, averages)


def export_report(outdir: str, table: ErrorTable, matrix: RankMatrix | None,
                  friedman_result: FriedmanResult | None,
                  cd: float | None,
                  pairs: Sequence[PairwiseComparison],
                  hierarchy: Sequence[HierarchyCheck],
                  notes: Sequence[str] = ()) -> dict:
    """Write error table, rank matrix, and a structured report.

    Returns the report payload.  The violin block carries each setting's
    rank distribution over the retained datasets.
    """
    import os
    os.makedirs(outdir, exist_ok=True)
    export_error_table(table, os.path.join(outdir, "error_table.csv"))
    payload: dict = {"notes": list(notes)}
    if matrix is not None:
        export_rank_matrix(matrix, os.path.join(outdir, "rank_matrix.csv"))
        payload["average_ranks"] = {s: matrix.averages[s]
                                    for s in matrix.settings}
        payload["dropped_datasets"] = list(matrix.dropped_datasets)
        payload["violin"] = {s: matrix.ranks_for(s) for s in matrix.settings}
        payload["hierarchy"] = [
            {"relation": h.relation, "lhs": h.lhs, "rhs": h.rhs,
             "satisfied": h.satisfied} for h in hierarchy]
    if friedman_result is not None:
        payload["friedman"] = {
            "statistic": friedman_result.statistic,
            "df": friedman_result.df,
            "critical_value": friedman_result.critical_value,
            "significant": friedman_result.significant,
        }
    if cd is not None:
        payload["critical_difference"] = cd
        payload["pairwise"] = [
            {"a": p.setting_a, "b": p.setting_b,
             "rank_difference": p.rank_difference, "critical": p.critical}
            for p in pairs]
    with open(os.path.join(outdir, "report.json"), "w",
              encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return payload
