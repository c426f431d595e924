#!/usr/bin/env python3
"""
フォールトツリーの最小カットセット生成と定量化
"""
import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from model import EventKind, FaultTree, GateOp, Model, ModelError, ResourceLimitError
from settings import (
    DEFAULT_BRUTEFORCE_EVENT_CAP, DEFAULT_EXACT_EVENT_CAP, DEFAULT_MAX_CUT_SETS, AnalysisSettings,
)

# 全状態列挙のチャンク（2^16状態）
CHUNK_BITS = 16


@dataclass(frozen=True)
class CutSet:
    """最小カットセット（eventsはid順）"""
    events: Tuple[str, ...]
    probability: float

    @property
    def order(self) -> int:
        return len(self.events)

    def format_events(self) -> str:
        return ";".join(self.events)


@dataclass
class CutSetExpansion:
    """カットセット生成結果と打ち切りで捨てた確率の総和"""
    cut_sets: List[CutSet]
    truncated_mass_bound: float = 0.0


@dataclass
class QuantResult:
    cut_sets: List[CutSet]
    rare_event_sum: float
    mcub: float
    exact: Optional[float]
    truncation: float
    truncated_mass_bound: float
    contributions: List[float] = field(default_factory=list)
    top: str = ""
    exact_event_cap: int = DEFAULT_EXACT_EVENT_CAP

    def headline(self, method: str = "sum") -> float:
        """
        見出しとして報告する頂上事象確率

        Args:
            method: sum, mcub, exact, all（allはsumと同じ）
        """
        if method in ("sum", "all"):
            return self.rare_event_sum
        if method == "mcub":
            return self.mcub
        if method == "exact":
            if self.exact is None:
                raise ResourceLimitError(
                    "exact_event_cap", self.exact_event_cap,
                    f"基本事象数が exact_event_cap={self.exact_event_cap} を超えるため厳密計算できません",
                )
            return self.exact
        raise ValueError(f"無効な定量化手法: {method}")


class WritSpace:
    """
    基本事象をビット位置に割り当て、カットセットを整数（writ）で扱う

    writのビットiが立っていれば events[i] を含む。0は空の積（真）
    """

    def __init__(self, events: Sequence[str], probabilities: Dict[str, float]):
        self.events = list(events)
        self.index = {event: i for i, event in enumerate(self.events)}
        self.probabilities = [probabilities[event] for event in self.events]
        self._cache: Dict[int, float] = {0: 1.0}

    def writ_of(self, events: Iterable[str]) -> int:
        writ = 0
        for event in events:
            writ |= 1 << self.index[event]
        return writ

    def members(self, writ: int) -> Tuple[str, ...]:
        return tuple(sorted(self.events[i] for i in range(len(self.events)) if writ >> i & 1))

    def probability(self, writ: int) -> float:
        p = self._cache.get(writ)
        if p is None:
            p = 1.0
            # 昇順のビット順に掛ける（決定的）
            for i in range(writ.bit_length()):
                if writ >> i & 1:
                    p *= self.probabilities[i]
            self._cache[writ] = p
        return p

    def to_cut_sets(self, writs: Iterable[int]) -> List[CutSet]:
        cut_sets = [CutSet(self.members(w), self.probability(w)) for w in writs]
        return sort_cut_sets(cut_sets)


def sort_cut_sets(cut_sets: Iterable[CutSet]) -> List[CutSet]:
    """確率の降順、同率はid列の辞書順"""
    return sorted(cut_sets, key=lambda cs: (-cs.probability, cs.events))


def minimize(writs: Iterable[int]) -> Set[int]:
    """吸収則で極小なwritだけを残す"""
    kept: List[int] = []
    for writ in sorted(set(writs), key=lambda w: (bin(w).count("1"), w)):
        if not any(other & ~writ == 0 for other in kept):
            kept.append(writ)
    return set(kept)


class _Expander:
    """トップダウンに到達したゲートを葉から順に積和展開する"""

    def __init__(self, space: WritSpace, truncation: float, max_cut_sets: int):
        self.space = space
        self.truncation = truncation
        self.max_cut_sets = max_cut_sets
        self.truncated_mass = 0.0

    def _check_cap(self, size: int, where: str):
        if size > self.max_cut_sets:
            raise ResourceLimitError(
                "max_cut_sets", self.max_cut_sets,
                f"{where}: カットセットの作業集合が max_cut_sets={self.max_cut_sets} を超えました（{size}件）",
            )

    def truncate(self, writs: Set[int]) -> Set[int]:
        kept = set()
        for writ in writs:
            p = self.space.probability(writ)
            if p < self.truncation:
                self.truncated_mass += p
            else:
                kept.add(writ)
        return kept

    def or_(self, inputs: Sequence[Set[int]], where: str) -> Set[int]:
        union = set().union(*inputs)
        self._check_cap(len(union), where)
        return minimize(union)

    def and_(self, inputs: Sequence[Set[int]], where: str) -> Set[int]:
        result = {0}
        for child in inputs:
            self._check_cap(len(result) * len(child), where)
            result = self.truncate({a | b for a in result for b in child})
            result = minimize(result)
        return result

    def kofn(self, k: int, inputs: Sequence[Set[int]], where: str) -> Set[int]:
        terms = [self.and_(combo, where) for combo in itertools.combinations(inputs, k)]
        return self.or_(terms, where)


def reachable_graph(model: Model, top: str) -> nx.DiGraph:
    """
    topから到達できるゲート・基本事象のグラフ（未定義参照・循環はModelError）
    """
    graph = nx.DiGraph()
    graph.add_node(top)
    stack = [top]
    while stack:
        node = stack.pop()
        gate = model.gate_map.get(node)
        if gate is None:
            if node not in model.event_map:
                raise ModelError(f"未定義のノードを参照しています: {node}")
            continue
        for child in gate.children:
            if child not in graph:
                stack.append(child)
            graph.add_edge(node, child)

    try:
        cycle = nx.find_cycle(graph, source=top)
    except nx.NetworkXNoCycle:
        return graph
    path = [edge[0] for edge in cycle]
    raise ModelError(f"cycle: ゲート参照が循環しています: {' -> '.join(path + path[:1])}")


def resolve_top(model: Model, name: str) -> str:
    """フォールトツリー名（またはゲートid）から頂上ゲートidを得る"""
    if name in model.fault_tree_map:
        return model.fault_tree_map[name].top
    if name in model.gate_map:
        return name
    return model.get_fault_tree(name).top


def generate_cut_sets(model: Model, top: str, truncation: float = 0.0,
                      max_cut_sets: int = DEFAULT_MAX_CUT_SETS) -> CutSetExpansion:
    """
    MOCUS型の積和展開で最小カットセットを求める

    Args:
        model: 検証済みモデル
        top: 頂上ゲートid
        truncation: 打ち切り値（途中の部分積にも適用）
        max_cut_sets: 作業集合の上限

    Returns:
        CutSetExpansion（カットセットは確率降順）
    """
    if truncation < 0:
        raise ValueError(f"打ち切り値は0以上である必要があります: {truncation}")

    graph = reachable_graph(model, top)
    events = sorted(node for node in graph if node not in model.gate_map)
    house = {e: model.event_map[e].probability for e in events if model.event_map[e].kind == EventKind.HOUSE}
    ordinary = [e for e in events if e not in house]
    space = WritSpace(ordinary, {e: model.event_map[e].probability for e in ordinary})
    expander = _Expander(space, truncation, max_cut_sets)

    values: Dict[str, Set[int]] = {}
    for node in reversed(list(nx.topological_sort(graph))):
        gate = model.gate_map.get(node)
        if gate is None:
            if node in house:
                # HOUSE: 1は真（空の積）、0は偽（空の和）
                values[node] = {0} if house[node] >= 1.0 else set()
            else:
                values[node] = expander.truncate({space.writ_of([node])})
            continue
        inputs = [values[child] for child in gate.children]
        if gate.op == GateOp.AND:
            values[node] = expander.and_(inputs, node)
        elif gate.op == GateOp.OR:
            values[node] = expander.or_(inputs, node)
        else:
            values[node] = expander.kofn(gate.k, inputs, node)

    writs = values[top]
    if 0 in writs:
        raise ModelError(f"{top}: HOUSE事象により頂上事象が常に真です")
    return CutSetExpansion(space.to_cut_sets(writs), expander.truncated_mass)


def minimal_cut_sets(ft: FaultTree, model: Model, truncation: float = 0.0,
                     max_cut_sets: int = DEFAULT_MAX_CUT_SETS) -> List[CutSet]:
    """フォールトツリーの最小カットセット（確率 >= truncation）"""
    return generate_cut_sets(model, ft.top, truncation, max_cut_sets).cut_sets


def conjoin_cut_sets(groups: Sequence[Sequence[CutSet]], model: Model, truncation: float = 0.0,
                     max_cut_sets: int = DEFAULT_MAX_CUT_SETS) -> CutSetExpansion:
    """
    複数のカットセット集合のAND（直積、吸収、打ち切り）

    イベントツリーのシーケンスで失敗分岐のカットセットを組み合わせるのに使う
    """
    events = sorted({e for group in groups for cs in group for e in cs.events})
    space = WritSpace(events, {e: model.event_map[e].probability for e in events})
    expander = _Expander(space, truncation, max_cut_sets)
    inputs = [{space.writ_of(cs.events) for cs in group} for group in groups]
    writs = expander.and_(inputs, "sequence")
    return CutSetExpansion(space.to_cut_sets(writs), expander.truncated_mass)


def contribution_percent(probability: float, total: float) -> float:
    """totalに対する寄与率（%）。totalが0なら0"""
    if total <= 0.0:
        return 0.0
    return probability / total * 100.0


def min_cut_upper_bound(probabilities: Sequence[float]) -> float:
    """MCUB = 1 − Π(1 − p)"""
    if not probabilities:
        return 0.0
    p = np.asarray(probabilities, dtype=float)
    with np.errstate(divide="ignore"):
        return float(-np.expm1(np.sum(np.log1p(-p))))


def _state_probabilities(states: np.ndarray, probabilities: np.ndarray) -> np.ndarray:
    """各状態（ビット列）の生起確率"""
    weights = np.ones(len(states), dtype=float)
    for i, p in enumerate(probabilities):
        bit = (states >> i) & 1
        weights *= np.where(bit == 1, p, 1.0 - p)
    return weights


def exact_from_cut_sets(cut_sets: Sequence[CutSet], model: Model,
                        event_cap: int = DEFAULT_EXACT_EVENT_CAP) -> Optional[float]:
    """
    カットセットの和事象の厳密確率（全状態列挙）

    Returns:
        基本事象数がevent_capを超える場合はNone
    """
    events = sorted(cut_set_events(cut_sets))
    if len(events) > event_cap:
        return None
    if not cut_sets:
        return 0.0

    space = WritSpace(events, {e: model.event_map[e].probability for e in events})
    writs = np.array([space.writ_of(cs.events) for cs in cut_sets], dtype=np.int64)
    probabilities = np.array(space.probabilities, dtype=float)

    total = 0.0
    n_states = 1 << len(events)
    chunk = 1 << CHUNK_BITS
    for start in range(0, n_states, chunk):
        states = np.arange(start, min(start + chunk, n_states), dtype=np.int64)
        hit = np.zeros(len(states), dtype=bool)
        for writ in writs:
            hit |= (states & writ) == writ
        total += float(np.sum(_state_probabilities(states[hit], probabilities)))
    return total


def exact_bruteforce(ft: FaultTree, model: Model,
                     event_cap: int = DEFAULT_BRUTEFORCE_EVENT_CAP) -> float:
    """
    ツリーを全2^n状態で直接評価した厳密な頂上事象確率（検証用）

    HOUSE事象は定数として扱い、列挙対象に数えない
    """
    graph = reachable_graph(model, ft.top)
    order = list(reversed(list(nx.topological_sort(graph))))
    events = sorted(node for node in graph if node not in model.gate_map)
    ordinary = [e for e in events if model.event_map[e].kind != EventKind.HOUSE]
    if len(ordinary) > event_cap:
        raise ResourceLimitError(
            "bruteforce_event_cap", event_cap,
            f"{ft.name}: 基本事象数 {len(ordinary)} が bruteforce_event_cap={event_cap} を超えています",
        )

    index = {event: i for i, event in enumerate(ordinary)}
    probabilities = np.array([model.event_map[e].probability for e in ordinary], dtype=float)

    total = 0.0
    n_states = 1 << len(ordinary)
    chunk = 1 << CHUNK_BITS
    for start in range(0, n_states, chunk):
        states = np.arange(start, min(start + chunk, n_states), dtype=np.int64)
        values: Dict[str, np.ndarray] = {}
        for node in order:
            gate = model.gate_map.get(node)
            if gate is None:
                if node in index:
                    values[node] = ((states >> index[node]) & 1).astype(bool)
                else:
                    values[node] = np.full(len(states), model.event_map[node].probability >= 1.0)
                continue
            children = np.array([values[child] for child in gate.children])
            if gate.op == GateOp.AND:
                values[node] = children.all(axis=0)
            elif gate.op == GateOp.OR:
                values[node] = children.any(axis=0)
            else:
                values[node] = children.sum(axis=0) >= gate.k
        top = values[ft.top]
        total += float(np.sum(_state_probabilities(states[top], probabilities)))
    return total


def quantify(cut_sets: Sequence[CutSet], model: Model, truncation: float = 0.0,
             truncated_mass_bound: float = 0.0, exact: bool = True,
             exact_event_cap: int = DEFAULT_EXACT_EVENT_CAP, top: str = "") -> QuantResult:
    """
    カットセットから頂上事象確率を定量化する

    Args:
        cut_sets: 最小カットセット
        model: 確率の参照元
        truncation: 生成時の打ち切り値（報告用）
        truncated_mass_bound: 生成時に捨てた確率の総和（報告用）
        exact: 厳密計算を試みるか
        exact_event_cap: 厳密計算する基本事象数の上限
        top: 頂上の名前（報告用）

    Returns:
        QuantResult
    """
    ordered = sort_cut_sets(cut_sets)
    probabilities = [cs.probability for cs in ordered]
    rare_event_sum = float(np.sum(probabilities)) if probabilities else 0.0
    mcub = min(min_cut_upper_bound(probabilities), rare_event_sum)
    exact_value = exact_from_cut_sets(ordered, model, exact_event_cap) if exact else None
    contributions = [contribution_percent(p, rare_event_sum) for p in probabilities]
    return QuantResult(
        cut_sets=ordered,
        rare_event_sum=rare_event_sum,
        mcub=mcub,
        exact=exact_value,
        truncation=truncation,
        truncated_mass_bound=truncated_mass_bound,
        contributions=contributions,
        top=top,
        exact_event_cap=exact_event_cap,
    )


def solve_fault_tree(model: Model, name: str, settings: Optional[AnalysisSettings] = None) -> QuantResult:
    """
    フォールトツリー名（またはゲートid）を指定してカットセット生成から定量化まで行う

    厳密値はカットセットの基本事象数がexact_event_cap以下なら手法によらず求める
    """
    settings = settings or AnalysisSettings()
    top = resolve_top(model, name)
    truncation = settings.truncation.get_truncation()
    expansion = generate_cut_sets(model, top, truncation, settings.limits.max_cut_sets)
    return quantify(
        expansion.cut_sets, model,
        truncation=truncation,
        truncated_mass_bound=expansion.truncated_mass_bound,
        exact=True,
        exact_event_cap=settings.limits.exact_event_cap,
        top=name,
    )


def single_points_of_failure(result: QuantResult) -> List[CutSet]:
    """1次のカットセット（単一故障点）"""
    return [cs for cs in result.cut_sets if cs.order == 1]


def cut_set_events(cut_sets: Iterable[CutSet]) -> FrozenSet[str]:
    """カットセットに現れる基本事象"""
    return frozenset(e for cs in cut_sets for e in cs.events)


@dataclass(frozen=True)
class TopComparison:
    """
    フォールトツリー1本の比較結果（頂上事象確率とカットセット数）

    flag: "" / "absent-baseline" / "absent-improved" / "zero-baseline"
    """
    fault_tree: str
    baseline: Optional[float]
    improved: Optional[float]
    delta_percent: Optional[float]
    baseline_cut_sets: Optional[int]
    improved_cut_sets: Optional[int]
    flag: str = ""


def delta_percent(baseline: float, improved: float) -> Optional[float]:
    """(improved − baseline) / baseline × 100。baselineが0なら等しい場合のみ0"""
    if baseline == 0.0:
        return 0.0 if improved == 0.0 else None
    return (improved - baseline) / baseline * 100.0


def compare_top_results(name: str, baseline: Optional[QuantResult], improved: Optional[QuantResult],
                        method: str = "sum") -> TopComparison:
    """2つの定量化結果の見出し値とカットセット数を比べる（どちらかがNoneなら欠損フラグ）"""
    base_value = baseline.headline(method) if baseline else None
    impr_value = improved.headline(method) if improved else None
    if baseline is None:
        flag, delta = "absent-baseline", None
    elif improved is None:
        flag, delta = "absent-improved", None
    else:
        delta = delta_percent(base_value, impr_value)
        flag = "zero-baseline" if delta is None else ""
    return TopComparison(
        fault_tree=name,
        baseline=base_value,
        improved=impr_value,
        delta_percent=delta,
        baseline_cut_sets=len(baseline.cut_sets) if baseline else None,
        improved_cut_sets=len(improved.cut_sets) if improved else None,
        flag=flag,
    )


def has_top(model: Model, name: str) -> bool:
    return name in model.fault_tree_map or name in model.gate_map


def compare_fault_trees(baseline: Model, improved: Model, names: Sequence[str],
                        settings: Optional[AnalysisSettings] = None) -> List[TopComparison]:
    """
    改良前後のモデルで同名のフォールトツリーを解いて比較する

    Args:
        baseline: 基準モデル
        improved: 改良モデル
        names: フォールトツリー名（またはゲートid）。指定順に並べ、重複は1つにまとめる
        settings: 解析設定（見出しの手法。allはsumとして扱う）

    Returns:
        TopComparisonのリスト
    """
    settings = settings or AnalysisSettings()
    method = settings.method.get_method()
    rows = []
    for name in dict.fromkeys(names):
        if not has_top(baseline, name) and not has_top(improved, name):
            resolve_top(baseline, name)
        base = solve_fault_tree(baseline, name, settings) if has_top(baseline, name) else None
        impr = solve_fault_tree(improved, name, settings) if has_top(improved, name) else None
        rows.append(compare_top_results(name, base, impr, method))
    return rows
