#!/usr/bin/env python3
"""
イベントツリーのシーケンス定量化とモデル間比較
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from tqdm import tqdm

from ft_engine import CutSet, QuantResult, conjoin_cut_sets, delta_percent, generate_cut_sets, quantify
from model import EventTree, Model, ModelError, Outcome, is_probability
from settings import AnalysisSettings


@dataclass(frozen=True)
class SequenceResult:
    sequence: str
    end_state: str
    frequency: float
    cut_set_count: Optional[int]


@dataclass(frozen=True)
class BranchResult:
    """分岐点の失敗確率とカットセット（固定確率の分岐はカットセットなし）"""
    label: str
    probability: float
    cut_sets: Optional[List[CutSet]] = None
    quant: Optional[QuantResult] = None


@dataclass(frozen=True)
class ComparisonRow:
    """
    シーケンス1行の比較結果

    flag: "" / "absent-baseline" / "absent-improved" / "zero-baseline"
    """
    sequence: str
    baseline: Optional[float]
    improved: Optional[float]
    delta_percent: Optional[float]
    baseline_cut_sets: Optional[int]
    improved_cut_sets: Optional[int]
    flag: str = ""
    improved_share_pct: Optional[float] = None
    delta_share_pct: Optional[float] = None


@dataclass(frozen=True)
class Comparison:
    rows: List[ComparisonRow]
    total: ComparisonRow


def solve_branches(et: EventTree, model: Model, settings: AnalysisSettings) -> Dict[str, BranchResult]:
    """各分岐点の失敗確率（リンクしたフォールトツリーの見出し値か固定確率）"""
    truncation = settings.truncation.get_truncation()
    method = settings.method.get_method()
    branches: Dict[str, BranchResult] = {}
    for bp in et.branch_points:
        if bp.fault_tree is not None:
            ft = model.get_fault_tree(bp.fault_tree)
            expansion = generate_cut_sets(model, ft.top, truncation, settings.limits.max_cut_sets)
            quant = quantify(
                expansion.cut_sets, model,
                truncation=truncation,
                truncated_mass_bound=expansion.truncated_mass_bound,
                exact=settings.method.needs_exact(),
                exact_event_cap=settings.limits.exact_event_cap,
                top=ft.name,
            )
            probability = quant.headline(method)
            cut_sets = quant.cut_sets
        elif bp.probability is not None:
            probability, cut_sets, quant = bp.probability, None, None
        else:
            raise ModelError(f"{et.name}/{bp.label}: フォールトツリーも固定確率もありません")

        if not is_probability(probability):
            raise ModelError(f"{et.name}/{bp.label}: 分岐確率が[0,1]の範囲外です: {probability!r}")
        branches[bp.label] = BranchResult(bp.label, probability, cut_sets, quant)
    return branches


def _count_cut_sets(failures: Sequence[BranchResult], model: Model, truncation: float,
                    max_cut_sets: int) -> int:
    """
    失敗分岐のカットセットの直積を打ち切り付きで数える

    固定確率の分岐は全カットセットに掛かる係数として扱う
    """
    factor = math.prod(b.probability for b in failures if b.cut_sets is None)
    groups = [b.cut_sets for b in failures if b.cut_sets is not None]
    if factor <= 0.0:
        return 0
    if not groups:
        return 1 if factor >= truncation else 0
    expansion = conjoin_cut_sets(groups, model, truncation / factor, max_cut_sets)
    return len(expansion.cut_sets)


def solve_event_tree(et: EventTree, model: Model, truncation: Optional[float] = None,
                     settings: Optional[AnalysisSettings] = None) -> List[SequenceResult]:
    """
    シーケンスごとの終状態頻度を求める

    頻度 = 起因事象頻度 × Π（失敗ならP、成功なら1−P）
    成功分岐はスカラー補数で扱う（削除項処理はしない）

    Args:
        et: イベントツリー
        model: 検証済みモデル
        truncation: 打ち切り値（settingsより優先）
        settings: 解析設定

    Returns:
        シーケンスid順のSequenceResult
    """
    settings = settings.copy() if settings else AnalysisSettings()
    if truncation is not None:
        settings.truncation.set_truncation(truncation, "argument")
    truncation = settings.truncation.get_truncation()

    branches = solve_branches(et, model, settings)
    frequency_ie = et.initiating_event.frequency

    results = []
    for seq in tqdm(et.sequences, desc=f"{et.name} シーケンス", disable=None, leave=False):
        frequency = frequency_ie
        failures = []
        for outcome in seq.outcomes:
            branch = branches.get(outcome.branch)
            if branch is None:
                raise ModelError(f"{et.name}/{seq.id}: 宣言されていない分岐点です: {outcome.branch}")
            if outcome.outcome == Outcome.FAILURE:
                frequency *= branch.probability
                failures.append(branch)
            else:
                frequency *= 1.0 - branch.probability
        count = _count_cut_sets(failures, model, truncation, settings.limits.max_cut_sets)
        results.append(SequenceResult(seq.id, seq.end_state, frequency, count))

    return sorted(results, key=lambda r: r.sequence)


def end_state_totals(results: Sequence[SequenceResult]) -> Dict[str, float]:
    """終状態ごとの頻度合計（終状態名順）"""
    totals: Dict[str, float] = {}
    for result in results:
        totals[result.end_state] = totals.get(result.end_state, 0.0) + result.frequency
    return dict(sorted(totals.items()))


def _sum_counts(values: Sequence[Optional[int]]) -> Optional[int]:
    present = [v for v in values if v is not None]
    return sum(present) if present else None


def compare_models(baseline: Sequence[SequenceResult], improved: Sequence[SequenceResult]) -> Comparison:
    """
    シーケンスidで外部結合してΔ%を求める

    Args:
        baseline: 基準モデルの結果
        improved: 改良モデルの結果

    Returns:
        Comparison（行はシーケンスid順、合計行つき）
    """
    base_map = {r.sequence: r for r in baseline}
    impr_map = {r.sequence: r for r in improved}

    base_total = sum(r.frequency for r in baseline)
    impr_total = sum(r.frequency for r in improved)
    total_delta = impr_total - base_total

    rows = []
    for sequence in sorted(set(base_map) | set(impr_map)):
        base = base_map.get(sequence)
        impr = impr_map.get(sequence)
        base_value = base.frequency if base else None
        impr_value = impr.frequency if impr else None

        if base is None:
            flag, delta = "absent-baseline", None
        elif impr is None:
            flag, delta = "absent-improved", None
        else:
            delta = delta_percent(base_value, impr_value)
            flag = "zero-baseline" if delta is None else ""

        improved_share = impr_value / impr_total * 100.0 if impr_value is not None and impr_total > 0 else None
        delta_share = None
        if total_delta != 0.0 and base_value is not None and impr_value is not None:
            delta_share = (impr_value - base_value) / total_delta * 100.0

        rows.append(ComparisonRow(
            sequence=sequence,
            baseline=base_value,
            improved=impr_value,
            delta_percent=delta,
            baseline_cut_sets=base.cut_set_count if base else None,
            improved_cut_sets=impr.cut_set_count if impr else None,
            flag=flag,
            improved_share_pct=improved_share,
            delta_share_pct=delta_share,
        ))

    total_delta_percent = delta_percent(base_total, impr_total)
    total = ComparisonRow(
        sequence="Total",
        baseline=base_total,
        improved=impr_total,
        delta_percent=total_delta_percent,
        baseline_cut_sets=_sum_counts([r.cut_set_count for r in baseline]),
        improved_cut_sets=_sum_counts([r.cut_set_count for r in improved]),
        flag="zero-baseline" if total_delta_percent is None else "",
        improved_share_pct=100.0 if impr_total > 0 else None,
        delta_share_pct=100.0 if total_delta != 0.0 else None,
    )
    return Comparison(rows, total)
