#!/usr/bin/env python3
"""
離散ベイジアンネットワークの厳密推論とソフトウェア故障確率（SFP）の推定
"""
import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from ccf_engine import BetaBreakdown, apply_modified_bfm
from model import BbnNetwork, CcfError, InputKind, Model, ModelError, format_suggestions


@dataclass(frozen=True)
class Factor:
    """変数の並びと同じ次元順のテーブル"""
    variables: Tuple[str, ...]
    values: np.ndarray

    def _aligned(self, variables: Sequence[str]) -> np.ndarray:
        """variablesの次元順に並べ替え、足りない次元を長さ1で補う"""
        order = [self.variables.index(v) for v in variables if v in self.variables]
        values = np.transpose(self.values, order)
        shape = []
        it = iter(values.shape)
        for v in variables:
            shape.append(next(it) if v in self.variables else 1)
        return values.reshape(shape)

    def __mul__(self, other: "Factor") -> "Factor":
        variables = self.variables + tuple(v for v in other.variables if v not in self.variables)
        return Factor(variables, self._aligned(variables) * other._aligned(variables))

    def sum_out(self, variable: str) -> "Factor":
        axis = self.variables.index(variable)
        return Factor(self.variables[:axis] + self.variables[axis + 1:], self.values.sum(axis=axis))

    def reduce(self, variable: str, index: int) -> "Factor":
        """観測値で次元を1つ落とす"""
        axis = self.variables.index(variable)
        return Factor(self.variables[:axis] + self.variables[axis + 1:], np.take(self.values, index, axis=axis))


@dataclass(frozen=True)
class Marginal:
    """
    事後周辺分布

    contradictory=True の場合、証拠の確率が0でprobabilitiesはNaN
    """
    node: str
    states: Tuple[str, ...]
    probabilities: Tuple[float, ...]
    evidence_probability: float
    contradictory: bool = False

    def probability_of(self, state: str) -> float:
        return self.probabilities[self.states.index(state)]

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.states, self.probabilities))


@dataclass(frozen=True)
class PhiCalibration:
    sfp_generic: float
    p_faults_generic: float
    phi: float


@dataclass(frozen=True)
class SfpResult:
    p_faults: float
    calibration: PhiCalibration
    sfp: float
    breakdown: Optional[BetaBreakdown] = None


def node_factor(network: BbnNetwork, node_id: str) -> Factor:
    """CPTを（親..., ノード）順のFactorにする"""
    node = network.node_map[node_id]
    parent_states = [network.node_map[p].states for p in node.parents]
    shape = [len(states) for states in parent_states] + [len(node.states)]
    values = np.zeros(shape, dtype=float)
    for combo in itertools.product(*[range(len(states)) for states in parent_states]):
        key = tuple(parent_states[i][j] for i, j in enumerate(combo))
        if key not in node.cpt:
            raise ModelError(f"{network.name}/{node_id}: CPTに親状態の組み合わせがありません: {key}")
        values[combo] = node.cpt[key]
    return Factor(tuple(node.parents) + (node_id,), values)


def network_graph(network: BbnNetwork) -> nx.DiGraph:
    graph = nx.DiGraph()
    for node in network.nodes:
        graph.add_node(node.id)
        for parent in node.parents:
            graph.add_edge(parent, node.id)
    if not nx.is_directed_acyclic_graph(graph):
        raise ModelError(f"{network.name}: BBNが循環しています")
    return graph


def min_fill_order(factors: Sequence[Factor], eliminate: Sequence[str]) -> List[str]:
    """
    min-fillヒューリスティックによる消去順（同数は辞書順）
    """
    graph = nx.Graph()
    for factor in factors:
        graph.add_nodes_from(factor.variables)
        graph.add_edges_from(itertools.combinations(factor.variables, 2))

    remaining = set(eliminate)
    order = []
    while remaining:
        def fill_in(v):
            neighbors = list(graph.neighbors(v))
            return sum(1 for a, b in itertools.combinations(neighbors, 2) if not graph.has_edge(a, b))

        chosen = min(remaining, key=lambda v: (fill_in(v), v))
        graph.add_edges_from(itertools.combinations(list(graph.neighbors(chosen)), 2))
        graph.remove_node(chosen)
        remaining.remove(chosen)
        order.append(chosen)
    return order


def _check_query(network: BbnNetwork, query: str, evidence: Mapping[str, str]):
    if query not in network.node_map:
        raise ModelError(f"{network.name}: ノードが見つかりません: {query}{format_suggestions(query, network.node_map)}")
    for node_id, state in evidence.items():
        node = network.node_map.get(node_id)
        if node is None:
            raise ModelError(
                f"{network.name}: 証拠のノードが見つかりません: {node_id}{format_suggestions(node_id, network.node_map)}"
            )
        if state not in node.states:
            raise ModelError(f"{network.name}/{node_id}: 状態が見つかりません: {state}（有効: {', '.join(node.states)}）")


def _contradictory(query_node, evidence_probability: float) -> Marginal:
    return Marginal(query_node.id, query_node.states, tuple(math.nan for _ in query_node.states),
                    evidence_probability, contradictory=True)


def infer_marginal(network: BbnNetwork, query: str, evidence: Optional[Mapping[str, str]] = None,
                   order: Optional[Sequence[str]] = None) -> Marginal:
    """
    変数消去法で事後周辺分布を求める

    Args:
        network: 検証済みネットワーク
        query: 問い合わせノード
        evidence: ノード → 観測状態
        order: 消去順（省略時はmin-fill）

    Returns:
        Marginal（証拠が矛盾する場合はcontradictory=True）
    """
    evidence = dict(evidence or {})
    _check_query(network, query, evidence)
    graph = network_graph(network)
    query_node = network.node_map[query]

    # 問い合わせと証拠の祖先以外は周辺化すると1になるので除く
    relevant = {query} | set(evidence)
    for node_id in list(relevant):
        relevant |= nx.ancestors(graph, node_id)

    factors = [node_factor(network, node_id) for node_id in sorted(relevant)]
    for node_id, state in sorted(evidence.items()):
        index = network.node_map[node_id].states.index(state)
        factors = [f.reduce(node_id, index) if node_id in f.variables else f for f in factors]

    hidden = sorted(relevant - {query} - set(evidence))
    if order is None:
        order = min_fill_order(factors, hidden)
    else:
        order = [v for v in order if v in hidden]
        if sorted(order) != hidden:
            raise ModelError(f"{network.name}: 消去順が消去対象の変数を過不足なく含んでいません")

    for variable in order:
        related = [f for f in factors if variable in f.variables]
        if not related:
            continue
        product = related[0]
        for factor in related[1:]:
            product = product * factor
        factors = [f for f in factors if variable not in f.variables] + [product.sum_out(variable)]

    result = Factor((), np.array(1.0))
    for factor in factors:
        result = result * factor

    if query in evidence:
        # 問い合わせ自身が観測済み: 残った定数が証拠の確率
        z = float(result.values)
        if z <= 0.0:
            return _contradictory(query_node, 0.0)
        probabilities = tuple(1.0 if s == evidence[query] else 0.0 for s in query_node.states)
        return Marginal(query, query_node.states, probabilities, z)

    values = result._aligned((query,)).reshape(-1)
    z = float(values.sum())
    if z <= 0.0:
        return _contradictory(query_node, 0.0)
    return Marginal(query, query_node.states, tuple(float(v) for v in values / z), z)


def enumerate_marginal(network: BbnNetwork, query: str, evidence: Optional[Mapping[str, str]] = None) -> Marginal:
    """
    全同時分布の列挙による周辺分布（検証用、小さなネットワーク向け）
    """
    evidence = dict(evidence or {})
    _check_query(network, query, evidence)
    network_graph(network)
    nodes = list(network.nodes)
    query_node = network.node_map[query]
    totals = [0.0] * len(query_node.states)

    for assignment in itertools.product(*[node.states for node in nodes]):
        states = dict(zip((node.id for node in nodes), assignment))
        if any(states[k] != v for k, v in evidence.items()):
            continue
        p = 1.0
        for node in nodes:
            row = node.cpt[tuple(states[parent] for parent in node.parents)]
            p *= row[node.states.index(states[node.id])]
        totals[query_node.states.index(states[query])] += p

    z = math.fsum(totals)
    if z <= 0.0:
        return _contradictory(query_node, 0.0)
    return Marginal(query, query_node.states, tuple(t / z for t in totals), z)


def query_faults(network: BbnNetwork, evidence: Optional[Mapping[str, str]] = None) -> float:
    """宣言された故障ノード・状態の確率 P(faults)"""
    if network.faults_node is None or network.faults_state is None:
        raise ModelError(f"{network.name}: faults_node / faults_state が宣言されていません")
    marginal = infer_marginal(network, network.faults_node, evidence)
    if marginal.contradictory:
        raise ModelError(f"{network.name}: 証拠が矛盾しています（確率0）")
    return marginal.probability_of(network.faults_state)


def calibrate_phi(sfp_generic: float, p_faults_generic: float) -> PhiCalibration:
    """φ = SFP_generic / P(faults)_generic"""
    for name, value in (("sfp_generic", sfp_generic), ("p_faults_generic", p_faults_generic)):
        if not (isinstance(value, (int, float)) and 0.0 <= value <= 1.0):
            raise CcfError(f"{name} は(0,1]の範囲である必要があります: {value!r}")
    if p_faults_generic == 0.0:
        raise CcfError("p_faults_generic が0です（zero denominator）")
    if sfp_generic == 0.0:
        raise CcfError("sfp_generic は(0,1]の範囲である必要があります: 0")
    return PhiCalibration(sfp_generic, p_faults_generic, sfp_generic / p_faults_generic)


def specific_failure_probability(phi: PhiCalibration, p_faults_specific: float) -> float:
    """SFP = φ · P(faults)_specific"""
    if not (0.0 <= p_faults_specific <= 1.0):
        raise CcfError(f"P(faults) が[0,1]の範囲外です: {p_faults_specific!r}")
    sfp = phi.phi * p_faults_specific
    if sfp > 1.0:
        raise CcfError(f"scaling overflow: SFP={sfp!r}")
    return sfp


def split_sfp(sfp: float, model: Model, group_name: str) -> BetaBreakdown:
    """SFPをQ_tとして個別故障とCCFに分ける"""
    return apply_modified_bfm(model, group_name, input_probability=sfp, input_kind=InputKind.TOTAL_GIVEN)


def network_calibration(network: BbnNetwork) -> PhiCalibration:
    """ネットワークに同梱された校正値からφを作る"""
    if network.sfp_generic is None or network.p_faults_generic is None:
        raise ModelError(f"{network.name}: 校正値（sfp_generic, p_faults_generic）がありません")
    return calibrate_phi(network.sfp_generic, network.p_faults_generic)


def sfp_pipeline(model: Model, network_name: str, group_name: Optional[str] = None,
                 calibration: Optional[PhiCalibration] = None,
                 evidence: Optional[Mapping[str, str]] = None) -> SfpResult:
    """
    P(faults)の推論からSFP、CCF分解までを一度に行う

    Args:
        model: モデル
        network_name: BBN名
        group_name: 分解するコンポーネントグループ（省略時は分解しない）
        calibration: φ（省略時はネットワークの校正値）
        evidence: 推論時の証拠
    """
    network = model.get_network(network_name)
    calibration = calibration or network_calibration(network)
    p_faults = query_faults(network, evidence)
    sfp = specific_failure_probability(calibration, p_faults)
    breakdown = split_sfp(sfp, model, group_name) if group_name else None
    return SfpResult(p_faults, calibration, sfp, breakdown)
