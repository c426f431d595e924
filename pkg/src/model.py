#!/usr/bin/env python3
"""
PRAモデルのドメイン型と構造検証
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Tuple

FORMAT_VERSION = 1

# PBF-Aのサブファクター（表の行順）
SUBFACTORS = (
    "Redundancy",
    "Separation",
    "Understanding",
    "Analysis",
    "MMI",
    "SafetyCulture",
    "Control",
    "Tests",
)

# A=防御が最も弱い、E=最も強い
GRADES = ("A", "A+", "B", "B+", "C", "D", "E")

DEFAULT_END_STATES = ("OK", "CD")


class EventKind(str, Enum):
    INDEPENDENT = "INDEPENDENT"
    CCF = "CCF"
    HOUSE = "HOUSE"


class FailureDomain(str, Enum):
    HARDWARE = "HARDWARE"
    SOFTWARE = "SOFTWARE"
    OTHER = "OTHER"


class RedundancyLevel(str, Enum):
    INDIVIDUAL = "INDIVIDUAL"
    RACK = "RACK"
    DIVISION = "DIVISION"
    ALL = "ALL"


class GateOp(str, Enum):
    AND = "AND"
    OR = "OR"
    KOFN = "KOFN"


class InputKind(str, Enum):
    TOTAL_GIVEN = "TOTAL_GIVEN"
    INDEPENDENT_GIVEN = "INDEPENDENT_GIVEN"


class Outcome(str, Enum):
    SUCCESS = "SUCCESS"
    FAILURE = "FAILURE"


class PradicError(Exception):
    """解析エラーの基底クラス"""


class ModelError(PradicError):
    """モデル構造の不整合（循環、未定義参照、範囲外の値）"""


class ResourceLimitError(PradicError):
    """設定された上限を超えた"""

    def __init__(self, limit_name: str, limit: int, message: str):
        super().__init__(message)
        self.limit_name = limit_name
        self.limit = limit


class CcfError(PradicError):
    """CCF計算の前提条件違反"""


class LookupScoreError(PradicError):
    """ベータ推定表の参照エラー"""


class ModelFileError(PradicError):
    """モデルファイルの構文・スキーマエラー"""

    def __init__(self, message: str, path: str = "", line: Optional[int] = None,
                 column: Optional[int] = None, diagnostics: Optional[List["Diagnostic"]] = None):
        super().__init__(message)
        self.path = path
        self.line = line
        self.column = column
        self.diagnostics = diagnostics or []

    def location(self) -> str:
        """path:line:column 形式の位置文字列"""
        parts = [self.path or "<input>"]
        if self.line is not None:
            parts.append(str(self.line))
            if self.column is not None:
                parts.append(str(self.column))
        return ":".join(parts)


@dataclass(frozen=True)
class Diagnostic:
    """検証結果の1件（データとして扱う）"""
    entity: str
    rule: str
    message: str
    severity: str = "error"

    def format(self) -> str:
        """機械可読な1行表現"""
        return f"{self.severity}: {self.rule}: {self.entity}: {self.message}"


def is_probability(value) -> bool:
    """0以上1以下の有限実数か"""
    return isinstance(value, (int, float)) and not isinstance(value, bool) \
        and math.isfinite(value) and 0.0 <= value <= 1.0


def is_frequency(value) -> bool:
    """0以上の有限実数か（年あたり頻度）"""
    return isinstance(value, (int, float)) and not isinstance(value, bool) \
        and math.isfinite(value) and value >= 0.0


@dataclass(frozen=True)
class BasicEvent:
    id: str
    probability: float
    description: str = ""
    kind: EventKind = EventKind.INDEPENDENT
    failure_domain: FailureDomain = FailureDomain.OTHER
    uca_category: Optional[str] = None
    redundancy_level: Optional[RedundancyLevel] = None


@dataclass(frozen=True)
class Gate:
    id: str
    op: GateOp
    children: Tuple[str, ...]
    k: Optional[int] = None
    description: str = ""


@dataclass(frozen=True)
class FaultTree:
    name: str
    top: str
    description: str = ""


@dataclass(frozen=True)
class InitiatingEvent:
    id: str
    frequency: float
    description: str = ""


@dataclass(frozen=True)
class BranchPoint:
    """分岐点。フォールトツリー名か固定確率のどちらか一方を持つ"""
    label: str
    fault_tree: Optional[str] = None
    probability: Optional[float] = None


@dataclass(frozen=True)
class BranchOutcome:
    branch: str
    outcome: Outcome


@dataclass(frozen=True)
class Sequence:
    id: str
    outcomes: Tuple[BranchOutcome, ...]
    end_state: str


@dataclass(frozen=True)
class EventTree:
    name: str
    initiating_event: InitiatingEvent
    branch_points: Tuple[BranchPoint, ...]
    sequences: Tuple[Sequence, ...]
    end_states: Tuple[str, ...] = DEFAULT_END_STATES
    description: str = ""


@dataclass(frozen=True)
class ComponentGroup:
    """同一コンポーネントの集合。CCCGはCccg.group側から参照する"""
    name: str
    component_ids: Tuple[str, ...]
    failure_domain: FailureDomain
    input_kind: InputKind
    input_probability: float
    expanded: bool = False
    description: str = ""


@dataclass(frozen=True)
class Cccg:
    """共通原因コンポーネントグループ。betaは直接指定かスコアシート参照"""
    id: str
    group: str
    members: Tuple[str, ...]
    coupling_factors: Tuple[str, ...] = ()
    beta: Optional[float] = None
    score_sheet: Optional[str] = None
    redundancy_level: Optional[RedundancyLevel] = None


@dataclass(frozen=True)
class ScoreSheet:
    name: str
    table: str
    grades: Dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class BetaTable:
    """サブファクター×グレードの数値表と分母d"""
    name: str
    cells: Dict[str, Dict[str, int]]
    denominator: float


@dataclass(frozen=True)
class BbnNode:
    """離散ノード。cptのキーは親状態のタプル（parents順）"""
    id: str
    states: Tuple[str, ...]
    parents: Tuple[str, ...] = ()
    cpt: Dict[Tuple[str, ...], Tuple[float, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class BbnNetwork:
    name: str
    nodes: Tuple[BbnNode, ...]
    faults_node: Optional[str] = None
    faults_state: Optional[str] = None
    sfp_generic: Optional[float] = None
    p_faults_generic: Optional[float] = None
    description: str = ""

    @cached_property
    def node_map(self) -> Dict[str, BbnNode]:
        return {node.id: node for node in self.nodes}


@dataclass(frozen=True)
class Model:
    """全エンジン共通のルートコンテナ（読み込み後は不変）"""
    basic_events: Tuple[BasicEvent, ...] = ()
    gates: Tuple[Gate, ...] = ()
    fault_trees: Tuple[FaultTree, ...] = ()
    event_trees: Tuple[EventTree, ...] = ()
    component_groups: Tuple[ComponentGroup, ...] = ()
    cccgs: Tuple[Cccg, ...] = ()
    score_sheets: Tuple[ScoreSheet, ...] = ()
    beta_tables: Tuple[BetaTable, ...] = ()
    bbn_networks: Tuple[BbnNetwork, ...] = ()
    provenance: str = ""
    format_version: int = FORMAT_VERSION

    @cached_property
    def event_map(self) -> Dict[str, BasicEvent]:
        return {event.id: event for event in self.basic_events}

    @cached_property
    def gate_map(self) -> Dict[str, Gate]:
        return {gate.id: gate for gate in self.gates}

    @cached_property
    def fault_tree_map(self) -> Dict[str, FaultTree]:
        return {ft.name: ft for ft in self.fault_trees}

    @cached_property
    def event_tree_map(self) -> Dict[str, EventTree]:
        return {et.name: et for et in self.event_trees}

    @cached_property
    def group_map(self) -> Dict[str, ComponentGroup]:
        return {group.name: group for group in self.component_groups}

    @cached_property
    def score_sheet_map(self) -> Dict[str, ScoreSheet]:
        return {sheet.name: sheet for sheet in self.score_sheets}

    @cached_property
    def beta_table_map(self) -> Dict[str, BetaTable]:
        return {table.name: table for table in self.beta_tables}

    @cached_property
    def network_map(self) -> Dict[str, BbnNetwork]:
        return {network.name: network for network in self.bbn_networks}

    def group_cccgs(self, group_name: str) -> List[Cccg]:
        """グループに属するCCCG（id順）"""
        return sorted((c for c in self.cccgs if c.group == group_name), key=lambda c: c.id)

    def get_fault_tree(self, name: str) -> FaultTree:
        if name not in self.fault_tree_map:
            raise ModelError(f"フォールトツリーが見つかりません: {name}{format_suggestions(name, self.fault_tree_map)}")
        return self.fault_tree_map[name]

    def get_event_tree(self, name: str) -> EventTree:
        if name not in self.event_tree_map:
            raise ModelError(f"イベントツリーが見つかりません: {name}{format_suggestions(name, self.event_tree_map)}")
        return self.event_tree_map[name]

    def get_group(self, name: str) -> ComponentGroup:
        if name not in self.group_map:
            raise ModelError(f"コンポーネントグループが見つかりません: {name}{format_suggestions(name, self.group_map)}")
        return self.group_map[name]

    def get_network(self, name: str) -> BbnNetwork:
        if name not in self.network_map:
            raise ModelError(f"BBNが見つかりません: {name}{format_suggestions(name, self.network_map)}")
        return self.network_map[name]


def suggest_ids(missing: str, known, limit: int = 3) -> List[str]:
    """
    存在しないidに対してレーベンシュタイン類似度で候補を返す

    Args:
        missing: 見つからなかったid
        known: 既知のid集合
        limit: 候補数

    Returns:
        類似度の降順（同率はid順）の候補リスト
    """
    import Levenshtein

    scored = [(Levenshtein.ratio(missing, candidate), candidate) for candidate in known]
    scored.sort(key=lambda x: (-x[0], x[1]))
    return [candidate for ratio, candidate in scored[:limit] if ratio >= 0.5]


def format_suggestions(missing: str, known) -> str:
    """「（候補: ...）」形式の補足文字列"""
    candidates = suggest_ids(missing, known)
    if not candidates:
        return ""
    return f"（候補: {', '.join(candidates)}）"


def node_ids(model: Model) -> Dict[str, str]:
    """ゲート・基本事象のid → 種別"""
    nodes = {event.id: "event" for event in model.basic_events}
    for gate in model.gates:
        nodes.setdefault(gate.id, "gate")
    return nodes


def find_gate_cycles(model: Model) -> List[Tuple[str, ...]]:
    """ゲート参照グラフの単純閉路（先頭を辞書順最小に回転、ソート済み）"""
    import networkx as nx

    graph = nx.DiGraph()
    for gate in model.gates:
        graph.add_node(gate.id)
        for child in gate.children:
            if child in model.gate_map:
                graph.add_edge(gate.id, child)

    cycles = []
    for cycle in nx.simple_cycles(graph):
        start = cycle.index(min(cycle))
        cycles.append(tuple(cycle[start:] + cycle[:start]))
    return sorted(set(cycles))


def validate(model: Model) -> List[Diagnostic]:
    """
    モデルの構造的な整合性を検証する（副作用なし、冪等）

    Args:
        model: 読み込み済みモデル

    Returns:
        診断リスト（entity, rule, message順にソート）。空なら整合
    """
    diagnostics: List[Diagnostic] = []

    def report(entity: str, rule: str, message: str, severity: str = "error"):
        diagnostics.append(Diagnostic(entity, rule, message, severity))

    _check_duplicates(model, report)
    _check_basic_events(model, report)
    _check_gates(model, report)
    _check_fault_trees(model, report)
    _check_event_trees(model, report)
    _check_groups(model, report)
    _check_score_sheets(model, report)
    _check_beta_tables(model, report)
    _check_networks(model, report)

    return sorted(set(diagnostics), key=lambda d: (d.entity, d.rule, d.message, d.severity))


def _check_duplicates(model: Model, report):
    # モデル全体で共有する名前空間
    seen: Dict[str, str] = {}
    namespace = (
        [("basic_event", e.id) for e in model.basic_events]
        + [("gate", g.id) for g in model.gates]
        + [("fault_tree", f.name) for f in model.fault_trees]
        + [("event_tree", t.name) for t in model.event_trees]
        + [("component_group", g.name) for g in model.component_groups]
        + [("score_sheet", s.name) for s in model.score_sheets]
        + [("bbn_network", n.name) for n in model.bbn_networks]
    )
    for kind, entity_id in namespace:
        if entity_id in seen:
            report(entity_id, "duplicate-id", f"idが重複しています（{seen[entity_id]} と {kind}）")
        else:
            seen[entity_id] = kind

    cccg_keys = set()
    for cccg in model.cccgs:
        key = (cccg.group, cccg.id)
        if key in cccg_keys:
            report(f"{cccg.group}/{cccg.id}", "duplicate-id", "同じグループ内でCCCGのidが重複しています")
        cccg_keys.add(key)

    tables = set()
    for table in model.beta_tables:
        if table.name in tables:
            report(table.name, "duplicate-id", "ベータ推定表が重複しています")
        tables.add(table.name)


def _check_basic_events(model: Model, report):
    for event in model.basic_events:
        if not is_probability(event.probability):
            report(event.id, "probability-range", f"確率が[0,1]の範囲外です: {event.probability}")
        elif event.kind == EventKind.HOUSE and event.probability not in (0.0, 1.0):
            report(event.id, "house-probability", f"HOUSE事象の確率は0か1である必要があります: {event.probability}")


def _check_gates(model: Model, report):
    nodes = node_ids(model)
    for gate in model.gates:
        if not gate.children:
            report(gate.id, "empty-gate", "子ノードがありません")
        if len(set(gate.children)) != len(gate.children):
            report(gate.id, "duplicate-child", "同じ子ノードが複数回参照されています")
        if gate.op == GateOp.KOFN:
            n = len(gate.children)
            if gate.k is None:
                report(gate.id, "kofn-k", "KOFNゲートにkがありません")
            elif gate.k < 1:
                report(gate.id, "kofn-k", f"k below 1: k={gate.k}")
            elif gate.k > n:
                report(gate.id, "kofn-k", f"k exceeds n: k={gate.k}, n={n}")
        elif gate.k is not None:
            report(gate.id, "kofn-k", f"{gate.op.value}ゲートにkは指定できません")
        for child in gate.children:
            if child not in nodes:
                report(gate.id, "dangling-reference",
                       f"未定義のノードを参照しています: {child}{format_suggestions(child, nodes)}")

    for cycle in find_gate_cycles(model):
        path = " -> ".join(cycle + (cycle[0],))
        report(cycle[0], "cycle", f"ゲート参照が循環しています: {path}")


def _check_fault_trees(model: Model, report):
    for ft in model.fault_trees:
        if ft.top not in model.gate_map:
            if ft.top in model.event_map:
                report(ft.name, "top-not-gate", f"頂上事象は基本事象ではなくゲートである必要があります: {ft.top}")
            else:
                report(ft.name, "dangling-reference",
                       f"頂上ゲートが見つかりません: {ft.top}{format_suggestions(ft.top, model.gate_map)}")


def _check_event_trees(model: Model, report):
    for et in model.event_trees:
        if not is_frequency(et.initiating_event.frequency):
            report(et.name, "frequency-range", f"起因事象頻度が負または非数です: {et.initiating_event.frequency}")

        labels = []
        for bp in et.branch_points:
            entity = f"{et.name}/{bp.label}"
            if bp.label in labels:
                report(entity, "duplicate-id", "分岐点ラベルが重複しています")
            labels.append(bp.label)
            if (bp.fault_tree is None) == (bp.probability is None):
                report(entity, "branch-link", "フォールトツリーか固定確率のどちらか一方を指定してください")
            elif bp.fault_tree is not None and bp.fault_tree not in model.fault_tree_map:
                report(entity, "dangling-reference",
                       f"フォールトツリーが見つかりません: {bp.fault_tree}"
                       f"{format_suggestions(bp.fault_tree, model.fault_tree_map)}")
            elif bp.probability is not None and not is_probability(bp.probability):
                report(entity, "probability-range", f"分岐確率が[0,1]の範囲外です: {bp.probability}")

        if len(set(et.end_states)) != len(et.end_states) or not et.end_states:
            report(et.name, "end-states", "終状態の宣言が空か重複しています")

        order = {label: i for i, label in enumerate(labels)}
        sequence_ids = set()
        for seq in et.sequences:
            entity = f"{et.name}/{seq.id}"
            if seq.id in sequence_ids:
                report(entity, "duplicate-id", "シーケンスidが重複しています")
            sequence_ids.add(seq.id)
            if seq.end_state not in et.end_states:
                report(entity, "unknown-end-state", f"宣言されていない終状態です: {seq.end_state}")

            visited = []
            for outcome in seq.outcomes:
                if outcome.branch not in order:
                    report(entity, "unknown-branch", f"宣言されていない分岐点です: {outcome.branch}")
                elif outcome.branch in visited:
                    report(entity, "repeated-branch", f"分岐点を2回以上通過しています: {outcome.branch}")
                else:
                    visited.append(outcome.branch)
            positions = [order[b] for b in visited]
            if positions != sorted(positions):
                report(entity, "outcome-order", "分岐結果が分岐点の宣言順になっていません")


def _check_groups(model: Model, report):
    for group in model.component_groups:
        if not group.component_ids:
            report(group.name, "empty-group", "コンポーネントがありません")
        if len(set(group.component_ids)) != len(group.component_ids):
            report(group.name, "duplicate-child", "コンポーネントが重複しています")
        if group.failure_domain not in (FailureDomain.HARDWARE, FailureDomain.SOFTWARE):
            report(group.name, "failure-domain", "故障領域はHARDWAREかSOFTWAREである必要があります")
        if not is_probability(group.input_probability):
            report(group.name, "probability-range", f"入力確率が[0,1]の範囲外です: {group.input_probability}")

        in_cccg = {member for cccg in model.group_cccgs(group.name) for member in cccg.members}
        for component in group.component_ids:
            if not group.expanded:
                if component not in model.event_map:
                    report(group.name, "unknown-component",
                           f"コンポーネントが基本事象として定義されていません: {component}"
                           f"{format_suggestions(component, model.event_map)}")
            elif component in in_cccg:
                if component not in model.gate_map:
                    report(group.name, "unknown-component", f"展開済みコンポーネントのORゲートがありません: {component}")
            elif f"IND-{component}" not in model.event_map:
                report(group.name, "unknown-component", f"展開済みコンポーネントの独立事象がありません: IND-{component}")

    for cccg in model.cccgs:
        entity = f"{cccg.group}/{cccg.id}"
        group = model.group_map.get(cccg.group)
        if group is None:
            report(entity, "dangling-reference",
                   f"コンポーネントグループが見つかりません: {cccg.group}{format_suggestions(cccg.group, model.group_map)}")
        else:
            outside = sorted(set(cccg.members) - set(group.component_ids))
            if outside:
                report(entity, "member-not-in-group", f"グループ外のメンバーがあります: {', '.join(outside)}")
        if len(set(cccg.members)) < 2:
            report(entity, "cccg-size", "CCCGには2つ以上のメンバーが必要です")
        if (cccg.beta is None) == (cccg.score_sheet is None):
            report(entity, "cccg-beta-source", "betaかscore_sheetのどちらか一方を指定してください")
        elif cccg.beta is not None and not (is_probability(cccg.beta) and 0.0 < cccg.beta < 1.0):
            report(entity, "beta-range", f"betaが(0,1)の範囲外です: {cccg.beta}")
        elif cccg.score_sheet is not None and cccg.score_sheet not in model.score_sheet_map:
            report(entity, "dangling-reference",
                   f"スコアシートが見つかりません: {cccg.score_sheet}"
                   f"{format_suggestions(cccg.score_sheet, model.score_sheet_map)}")


def _check_score_sheets(model: Model, report):
    for sheet in model.score_sheets:
        if sheet.table not in (FailureDomain.HARDWARE.value, FailureDomain.SOFTWARE.value):
            report(sheet.name, "unknown-table", f"ベータ推定表が不明です: {sheet.table}")
        for subfactor, grade in sheet.grades.items():
            if subfactor not in SUBFACTORS:
                report(sheet.name, "unknown-subfactor", f"不明なサブファクターです: {subfactor}")
            if grade not in GRADES:
                report(sheet.name, "unknown-grade", f"不明なグレードです: {subfactor}={grade}")
        missing = [s for s in SUBFACTORS if s not in sheet.grades]
        if missing:
            report(sheet.name, "missing-subfactor", f"未評価のサブファクターがあります: {', '.join(missing)}")


def _check_beta_tables(model: Model, report):
    for table in model.beta_tables:
        if table.name not in (FailureDomain.HARDWARE.value, FailureDomain.SOFTWARE.value):
            report(table.name, "unknown-table", "ベータ推定表の名前はHARDWAREかSOFTWAREです")
        if not (isinstance(table.denominator, (int, float)) and table.denominator > 0):
            report(table.name, "denominator", f"分母dは正の数である必要があります: {table.denominator}")
        for subfactor in SUBFACTORS:
            row = table.cells.get(subfactor)
            if row is None:
                report(table.name, "missing-subfactor", f"行がありません: {subfactor}")
                continue
            missing = [g for g in ("A", "B", "C", "D", "E") if g not in row]
            if missing:
                report(table.name, "missing-grade", f"{subfactor}行に値がありません: {', '.join(missing)}")
                continue
            values = [row[g] for g in GRADES if g in row]
            if any(a <= b for a, b in zip(values, values[1:])):
                report(table.name, "table-order", f"{subfactor}行がAからEへ狭義単調減少していません")


def _check_networks(model: Model, report):
    import networkx as nx

    for network in model.bbn_networks:
        graph = nx.DiGraph()
        ids = set()
        for node in network.nodes:
            entity = f"{network.name}/{node.id}"
            if node.id in ids:
                report(entity, "duplicate-id", "ノードidが重複しています")
            ids.add(node.id)
            graph.add_node(node.id)
            if len(node.states) < 2 or len(set(node.states)) != len(node.states):
                report(entity, "node-states", "状態は2つ以上の重複しないラベルが必要です")

        node_map = network.node_map
        for node in network.nodes:
            entity = f"{network.name}/{node.id}"
            unknown = [p for p in node.parents if p not in node_map]
            for parent in unknown:
                report(entity, "dangling-reference",
                       f"親ノードが見つかりません: {parent}{format_suggestions(parent, node_map)}")
            for parent in node.parents:
                if parent in node_map:
                    graph.add_edge(parent, node.id)
            if unknown:
                continue
            _check_cpt(node, node_map, entity, report)

        if not nx.is_directed_acyclic_graph(graph):
            cycle = [edge[0] for edge in nx.find_cycle(graph)]
            report(network.name, "cycle", f"BBNが循環しています: {' -> '.join(cycle + cycle[:1])}")

        if network.faults_node is not None:
            node = node_map.get(network.faults_node)
            if node is None:
                report(network.name, "dangling-reference", f"故障ノードが見つかりません: {network.faults_node}")
            elif network.faults_state not in node.states:
                report(network.name, "unknown-state", f"故障状態が見つかりません: {network.faults_state}")


def _check_cpt(node: BbnNode, node_map: Dict[str, BbnNode], entity: str, report):
    import itertools

    expected = set(itertools.product(*(node_map[p].states for p in node.parents)))
    given = set(node.cpt.keys())
    if given != expected:
        missing = len(expected - given)
        extra = len(given - expected)
        report(entity, "cpt-coverage", f"CPTの親状態の組み合わせが不一致です（不足{missing}件、余分{extra}件）")
    for key, row in node.cpt.items():
        label = ",".join(key) if key else "(root)"
        if len(row) != len(node.states):
            report(entity, "cpt-row", f"CPT行の長さが状態数と一致しません: {label}")
        elif any(not is_probability(p) for p in row):
            report(entity, "probability-range", f"CPT行に[0,1]の範囲外の値があります: {label}")
        elif abs(sum(row) - 1.0) > 1e-9:
            report(entity, "cpt-row-sum", f"CPT行の合計が1ではありません: {label} (sum={sum(row)!r})")
