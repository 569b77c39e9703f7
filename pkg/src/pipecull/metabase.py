"""The meta-knowledge base: per-(dataset, predictor) evaluation summaries.

Each cell aggregates completed evaluations, attributing a pipeline's
error wholly to its final predictor.  Cells keep running sums rather
than means, so merging two bases is exact and saving is idempotent:
the canonical file form (sorted keys, 12 significant digits) reparses
to the same bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .evaluation import STATUS_COMPLETE, EvaluationRecord
from .ranking import tie_averaged_ranks

FORMAT_VERSION = 1


class MetabaseError(ValueError):
    """Corrupt persisted base, version mismatch, or an unknown dataset."""


def _f12(x: float) -> float:
    """Round-trip through the canonical 12-significant-digit form."""
    return float(f"{x:.12g}")


@dataclass
class Cell:
    error_sum: float = 0.0
    time_sum: float = 0.0
    n: int = 0

    @property
    def mean_error(self) -> float:
        return self.error_sum / self.n

    @property
    def mean_time(self) -> float:
        return self.time_sum / self.n


@dataclass(frozen=True)
class DatasetRanking:
    """Tie-averaged predictor ranks for one dataset (rank 1 is best)."""

    dataset: str
    ranks: dict[str, float]
    order: tuple[str, ...]
    unranked: tuple[str, ...] = ()


@dataclass(frozen=True)
class LeaderboardEntry:
    predictor: str
    avg_rank: float | None
    mean_error: float | None
    mean_time: float | None = None
    unranked: bool = False


@dataclass(frozen=True)
class TopK:
    predictors: tuple[str, ...]
    clamped: bool
    requested: int
    mode: str
    notes: tuple[str, ...] = ()


class MetaKnowledgeBase:
    def __init__(self) -> None:
        self.datasets: list[str] = []
        self.predictors: list[str] = []
        self.cells: dict[tuple[str, str], Cell] = {}

    # -- construction ---------------------------------------------------

    def _cell(self, dataset: str, predictor: str) -> Cell:
        key = (dataset, predictor)
        if key not in self.cells:
            if dataset not in self.datasets:
                self.datasets.append(dataset)
            if predictor not in self.predictors:
                self.predictors.append(predictor)
            self.cells[key] = Cell()
        return self.cells[key]

    def register_predictor(self, predictor: str) -> None:
        """Make a predictor known without any evaluations (stays unranked)."""
        if predictor not in self.predictors:
            self.predictors.append(predictor)

    def ingest(self, records: Iterable[EvaluationRecord | str]) -> int:
        """Fold completed records into the cells; returns skipped count.

        Accepts record objects or raw JSON lines; malformed lines and
        non-complete records are skipped (counted, not raised).
        """
        skipped = 0
        for item in records:
            if isinstance(item, str):
                try:
                    item = EvaluationRecord.from_json_line(item)
                except (ValueError, KeyError, TypeError):
                    skipped += 1
                    continue
            if item.status != STATUS_COMPLETE or item.mean_error is None:
                skipped += 1
                continue
            cell = self._cell(item.dataset, item.predictor)
            cell.error_sum += item.mean_error
            cell.time_sum += item.wall_time
            cell.n += 1
        return skipped

    def merge(self, other: "MetaKnowledgeBase") -> None:
        for (ds, pred), cell in other.cells.items():
            mine = self._cell(ds, pred)
            mine.error_sum += cell.error_sum
            mine.time_sum += cell.time_sum
            mine.n += cell.n
        for p in other.predictors:
            self.register_predictor(p)

    # -- queries --------------------------------------------------------

    def cell(self, dataset: str, predictor: str) -> Cell | None:
        return self.cells.get((dataset, predictor))

    def evaluation_count(self, dataset: str) -> int:
        return sum(c.n for (ds, _), c in self.cells.items() if ds == dataset)

    def per_dataset_ranking(self, dataset: str) -> DatasetRanking:
        if dataset not in self.datasets:
            raise MetabaseError(f"dataset absent from the base: {dataset}")
        scored = [(p, self.cells[(dataset, p)]) for p in self.predictors
                  if (dataset, p) in self.cells]
        unranked = tuple(p for p in self.predictors
                         if (dataset, p) not in self.cells)
        if not scored:
            raise MetabaseError(f"no evaluations recorded for {dataset}")
        ranks_list = tie_averaged_ranks([c.mean_error for _, c in scored])
        ranks = {p: r for (p, _), r in zip(scored, ranks_list)}
        order = tuple(sorted(
            (p for p, _ in scored),
            key=lambda p: (self.cells[(dataset, p)].mean_error,
                           self.cells[(dataset, p)].mean_time, p)))
        return DatasetRanking(dataset, ranks, order, unranked)

    def global_leaderboard(self) -> list[LeaderboardEntry]:
        """Average per-dataset rank, ascending; never-evaluated go last."""
        per_ds = {ds: self.per_dataset_ranking(ds) for ds in self.datasets}
        entries = []
        for p in self.predictors:
            ranked_in = [r.ranks[p] for r in per_ds.values() if p in r.ranks]
            if not ranked_in:
                entries.append(LeaderboardEntry(p, None, None, unranked=True))
                continue
            cells = [self.cells[(ds, p)] for ds in self.datasets
                     if (ds, p) in self.cells]
            total_err = sum(c.error_sum for c in cells)
            total_t = sum(c.time_sum for c in cells)
            total_n = sum(c.n for c in cells)
            entries.append(LeaderboardEntry(
                p, sum(ranked_in) / len(ranked_in), total_err / total_n,
                total_t / total_n))
        ranked = [e for e in entries if not e.unranked]
        ranked.sort(key=lambda e: (e.avg_rank, e.mean_error, e.predictor))
        tail = sorted((e for e in entries if e.unranked),
                      key=lambda e: e.predictor)
        return ranked + tail

    def _ordered_from(self, ordering: Sequence[str], k: int, mode: str) -> TopK:
        notes: list[str] = []
        clamped = False
        requested = k
        if k < 1:
            raise MetabaseError(f"k must be positive, got {k}")
        if k > len(ordering):
            clamped = True
            notes.append(f"k={k} clamped to {len(ordering)} rankable predictors")
            k = len(ordering)
        return TopK(tuple(ordering[:k]), clamped, requested, mode, tuple(notes))

    def top_k(self, k: int, mode: str = "global",
              dataset: str | None = None) -> TopK:
        """The k predictors to keep: global consensus or one dataset's own.

        Boundary ties fall to lower overall mean error, then mean time,
        then id.
        """
        if mode == "global":
            board = [e for e in self.global_leaderboard() if not e.unranked]
            board.sort(key=lambda e: (e.avg_rank, e.mean_error, e.mean_time,
                                      e.predictor))
            return self._ordered_from([e.predictor for e in board], k, mode)
        if mode == "oracle":
            if dataset is None:
                raise MetabaseError("oracle mode needs a dataset")
            ranking = self.per_dataset_ranking(dataset)
            return self._ordered_from(list(ranking.order), k, mode)
        raise MetabaseError(f"unknown top-k mode: {mode}")

    def fastest_predictors(self, count: int = 5) -> list[str]:
        """Cheapest predictors by pooled mean evaluation time."""
        stats = []
        for p in self.predictors:
            cells = [c for (ds, pp), c in self.cells.items() if pp == p]
            if not cells:
                continue
            total_t = sum(c.time_sum for c in cells)
            total_n = sum(c.n for c in cells)
            stats.append((total_t / total_n, p))
        stats.sort(key=lambda t: (t[0], t[1]))
        return [p for _, p in stats[:count]]

    def landmark_errors(self, dataset: str,
                        landmarkers: Sequence[str]) -> list[float | None]:
        out: list[float | None] = []
        for p in landmarkers:
            c = self.cells.get((dataset, p))
            out.append(None if c is None else c.mean_error)
        return out

    def leave_one_out(self, dataset: str) -> "MetaKnowledgeBase":
        """A view of the base without one dataset's rows.

        A dataset that was never ingested yields the base unchanged
        (callers treat that as a flagged identity view).
        """
        view = MetaKnowledgeBase()
        view.predictors = list(self.predictors)
        for ds in self.datasets:
            if ds == dataset:
                continue
            view.datasets.append(ds)
        for (ds, p), cell in self.cells.items():
            if ds != dataset:
                view.cells[(ds, p)] = Cell(cell.error_sum, cell.time_sum, cell.n)
        return view

    # -- persistence ----------------------------------------------------

    def canonical_bytes(self) -> bytes:
        rows = []
        for (ds, p) in sorted(self.cells):
            c = self.cells[(ds, p)]
            rows.append({
                "dataset": ds,
                "predictor": p,
                "error_sum": _f12(c.error_sum),
                "time_sum": _f12(c.time_sum),
                "n": c.n,
            })
        payload = {
            "format_version": FORMAT_VERSION,
            "datasets": self.datasets,
            "predictors": self.predictors,
            "cells": rows,
        }
        return (json.dumps(payload, sort_keys=True, indent=1) + "\n").encode("utf-8")

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, MetaKnowledgeBase)
                and self.canonical_bytes() == other.canonical_bytes())

    def save(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(self.canonical_bytes())

    @classmethod
    def load(cls, path: str) -> "MetaKnowledgeBase":
        with open(path, "rb") as fh:
            raw = fh.read()
        if not raw.strip():
            raise MetabaseError(f"{path}: empty meta-knowledge file")
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MetabaseError(f"{path}: corrupt meta-knowledge file: {exc}") \
                from None
        if not isinstance(payload, Mapping) or "format_version" not in payload:
            raise MetabaseError(f"{path}: missing format version")
        if payload["format_version"] != FORMAT_VERSION:
            raise MetabaseError(
                f"{path}: format version {payload['format_version']} "
                f"unsupported (expected {FORMAT_VERSION})")
        base = cls()
        try:
            base.datasets = list(payload["datasets"])
            base.predictors = list(payload["predictors"])
            for row in payload["cells"]:
                base.cells[(row["dataset"], row["predictor"])] = Cell(
                    float(row["error_sum"]), float(row["time_sum"]),
                    int(row["n"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise MetabaseError(f"{path}: corrupt cell data: {exc}") from None
        return base
