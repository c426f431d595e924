#!/usr/bin/env python3
"""
修正ベータファクターモデルによるCCF分解と基本事象への展開
"""
from dataclasses import dataclass, replace
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from tqdm import tqdm

from beta_table import estimate_beta, get_table
from model import (
    BasicEvent, Cccg, CcfError, ComponentGroup, Diagnostic, EventKind, FailureDomain, Gate,
    GateOp, InputKind, Model, ModelError, RedundancyLevel, is_probability,
)


class ResolvedCccg(NamedTuple):
    """betaが確定したCCCG"""
    id: str
    members: Tuple[str, ...]
    beta: float


@dataclass(frozen=True)
class BetaBreakdown:
    """
    グループのCCF分解結果

    beta_total / q_independent は最も多くのCCCGに属するコンポーネントの値。
    コンポーネントごとの値は *_per_component に持つ
    """
    group: str
    beta_per_cccg: Dict[str, float]
    beta_total: float
    q_total: float
    q_independent: float
    p_per_cccg: Dict[str, float]
    beta_total_per_component: Dict[str, float]
    q_independent_per_component: Dict[str, float]

    @property
    def q_dependent(self) -> float:
        """Q_D = Q_t·β_t"""
        return self.q_total * self.beta_total


def ind_event_id(component_id: str) -> str:
    return f"IND-{component_id}"


def ccf_event_id(group_name: str, cccg_id: str) -> str:
    return f"CCF-{group_name}-{cccg_id}"


def modified_bfm(group_name: str, component_ids: Sequence[str], input_kind: InputKind,
                 input_probability: float, cccgs: Sequence[ResolvedCccg]) -> BetaBreakdown:
    """
    修正BFMでQ_t、Q_I、P(CCCG_w)を求める

    Args:
        group_name: グループ名
        component_ids: グループのコンポーネント
        input_kind: TOTAL_GIVEN（Q_t既知）かINDEPENDENT_GIVEN（Q_I既知）
        input_probability: 入力確率
        cccgs: betaが確定したCCCG

    Returns:
        BetaBreakdown
    """
    if not is_probability(input_probability):
        raise CcfError(f"{group_name}: 入力確率が[0,1]の範囲外です: {input_probability}")

    beta_per_cccg = {}
    for cccg in sorted(cccgs, key=lambda c: c.id):
        if not (0.0 < cccg.beta < 1.0):
            raise CcfError(f"{group_name}/{cccg.id}: betaが(0,1)の範囲外です: {cccg.beta}")
        beta_per_cccg[cccg.id] = cccg.beta

    # β_t(c) = Σ_{w∋c} β_w
    beta_total_per_component = {}
    for component in component_ids:
        beta_total_per_component[component] = sum(
            cccg.beta for cccg in sorted(cccgs, key=lambda c: c.id) if component in cccg.members
        )
        if beta_total_per_component[component] >= 1.0:
            raise CcfError(
                f"{group_name}: inconsistent betas: {component} のβ合計が1以上です "
                f"({beta_total_per_component[component]!r})"
            )

    beta_total = max(beta_total_per_component.values(), default=0.0)

    if input_kind == InputKind.TOTAL_GIVEN:
        q_total = input_probability
        q_independent = (1.0 - beta_total) * q_total
    else:
        if len(set(beta_total_per_component.values())) > 1:
            raise CcfError(
                f"{group_name}: INDEPENDENT_GIVEN入力ではすべてのコンポーネントが同じCCCG構成である必要があります"
            )
        # Q_I = (1 − β_t)·Q_t を逆に解く
        q_total = input_probability / (1.0 - beta_total)
        if q_total > 1.0:
            raise CcfError(f"{group_name}: probability overflow: Q_t={q_total!r}")
        q_independent = input_probability

    p_per_cccg = {cccg_id: beta * q_total for cccg_id, beta in beta_per_cccg.items()}

    q_independent_per_component = {}
    for component, beta_c in beta_total_per_component.items():
        if input_kind == InputKind.INDEPENDENT_GIVEN:
            q_independent_per_component[component] = input_probability
        else:
            q_independent_per_component[component] = (1.0 - beta_c) * q_total

    return BetaBreakdown(
        group=group_name,
        beta_per_cccg=beta_per_cccg,
        beta_total=beta_total,
        q_total=q_total,
        q_independent=q_independent,
        p_per_cccg=p_per_cccg,
        beta_total_per_component=beta_total_per_component,
        q_independent_per_component=q_independent_per_component,
    )


def resolve_cccg_beta(model: Model, group: ComponentGroup, cccg: Cccg) -> float:
    """
    CCCGのbetaを確定する（直接指定、またはスコアシートから推定）
    """
    if cccg.beta is not None:
        return cccg.beta
    if cccg.score_sheet is None:
        raise ModelError(f"{group.name}/{cccg.id}: betaもscore_sheetも指定されていません")

    sheet = model.score_sheet_map.get(cccg.score_sheet)
    if sheet is None:
        raise ModelError(f"{group.name}/{cccg.id}: スコアシートが見つかりません: {cccg.score_sheet}")
    if sheet.table != group.failure_domain.value:
        raise CcfError(
            f"{group.name}/{cccg.id}: スコアシート {sheet.name} の表 {sheet.table} が"
            f"グループの故障領域 {group.failure_domain.value} と一致しません"
        )
    return estimate_beta(get_table(sheet.table, model), sheet)


def resolve_cccgs(model: Model, group: ComponentGroup) -> List[ResolvedCccg]:
    """グループの全CCCGのbetaを確定する（id順）"""
    return [
        ResolvedCccg(cccg.id, tuple(cccg.members), resolve_cccg_beta(model, group, cccg))
        for cccg in model.group_cccgs(group.name)
    ]


def apply_modified_bfm(model: Model, group_name: str, input_probability: Optional[float] = None,
                       input_kind: Optional[InputKind] = None) -> BetaBreakdown:
    """
    モデル中のグループに修正BFMを適用する

    Args:
        model: モデル
        group_name: グループ名
        input_probability: 入力確率の上書き（省略時はグループの値）
        input_kind: 入力種別の上書き（省略時はグループの値）
    """
    group = model.get_group(group_name)
    return modified_bfm(
        group.name,
        group.component_ids,
        input_kind or group.input_kind,
        group.input_probability if input_probability is None else input_probability,
        resolve_cccgs(model, group),
    )


def expand_ccf(model: Model, group_name: str) -> Tuple[Model, List[Diagnostic]]:
    """
    グループのコンポーネント故障を独立事象とCCF事象に展開した新しいモデルを返す

    - コンポーネントごとに IND-<component>（確率Q_I）
    - CCCGごとに CCF-<group>-<cccg>（確率P(CCCG_w)）
    - CCCGに属するコンポーネントは同じidのORゲートに置き換え、参照はそのまま
    - どのCCCGにも属さないコンポーネントは参照を IND-<component> に付け替え
    展開済みグループは何もせず警告を返す（元のモデルは変更しない）
    """
    group = model.get_group(group_name)
    if group.expanded:
        return model, [Diagnostic(group.name, "already-expanded", "展開済みのため何もしません", "warning")]

    cccgs = model.group_cccgs(group.name)
    breakdown = apply_modified_bfm(model, group.name)
    if not check_conservation(breakdown):
        raise CcfError(f"{group.name}: Q_I + Σ P(CCCG) が Q_t と一致しません")

    existing = set(model.event_map) | set(model.gate_map)
    components = set(group.component_ids)

    new_events: List[BasicEvent] = []
    for component in group.component_ids:
        original = model.event_map.get(component)
        new_events.append(BasicEvent(
            id=ind_event_id(component),
            probability=breakdown.q_independent_per_component[component],
            description=f"{component} 独立故障" if original is None or not original.description
            else f"{original.description}（独立故障）",
            kind=EventKind.INDEPENDENT,
            failure_domain=group.failure_domain,
            uca_category=original.uca_category if original else None,
            redundancy_level=RedundancyLevel.INDIVIDUAL,
        ))
    for cccg in cccgs:
        factors = ", ".join(cccg.coupling_factors)
        new_events.append(BasicEvent(
            id=ccf_event_id(group.name, cccg.id),
            probability=breakdown.p_per_cccg[cccg.id],
            description=f"{group.name} CCF {cccg.id}" + (f"（{factors}）" if factors else ""),
            kind=EventKind.CCF,
            failure_domain=group.failure_domain,
            redundancy_level=cccg.redundancy_level,
        ))

    conflicts = sorted(event.id for event in new_events if event.id in existing)
    if conflicts:
        raise ModelError(f"{group.name}: 展開先のidが既に存在します: {', '.join(conflicts)}")

    memberships: Dict[str, List[str]] = {component: [] for component in group.component_ids}
    for cccg in cccgs:
        for member in cccg.members:
            memberships[member].append(ccf_event_id(group.name, cccg.id))

    relabel = {c: ind_event_id(c) for c, ccf_ids in memberships.items() if not ccf_ids}

    gates = []
    for gate in model.gates:
        if any(child in relabel for child in gate.children):
            gate = replace(gate, children=tuple(relabel.get(child, child) for child in gate.children))
        gates.append(gate)
    for component in group.component_ids:
        if memberships[component]:
            gates.append(Gate(
                id=component,
                op=GateOp.OR,
                children=(ind_event_id(component),) + tuple(memberships[component]),
                description=f"{component} 故障（独立 + CCF）",
            ))

    basic_events = [event for event in model.basic_events if event.id not in components] + new_events
    groups = tuple(replace(g, expanded=True) if g.name == group.name else g for g in model.component_groups)

    expanded = replace(
        model,
        basic_events=tuple(basic_events),
        gates=tuple(gates),
        component_groups=groups,
    )
    return expanded, []


def expand_all(model: Model) -> Tuple[Model, Dict[str, BetaBreakdown], List[Diagnostic]]:
    """
    未展開の全グループを名前順に展開する

    Returns:
        (展開後モデル, グループ名→BetaBreakdown, 診断リスト)
    """
    breakdowns: Dict[str, BetaBreakdown] = {}
    diagnostics: List[Diagnostic] = []
    names = sorted(group.name for group in model.component_groups)
    for name in tqdm(names, desc="CCF展開", disable=None):
        if not model.group_map[name].expanded:
            breakdowns[name] = apply_modified_bfm(model, name)
        model, group_diagnostics = expand_ccf(model, name)
        diagnostics.extend(group_diagnostics)
    return model, breakdowns, diagnostics


def check_conservation(breakdown: BetaBreakdown, tolerance: float = 1e-12) -> bool:
    """各コンポーネントで Q_I + Σ P(CCCG_w) = Q_t が成り立つか（相対誤差）"""
    for component, beta_c in breakdown.beta_total_per_component.items():
        dependent = beta_c * breakdown.q_total
        total = breakdown.q_independent_per_component[component] + dependent
        if abs(total - breakdown.q_total) > tolerance * max(breakdown.q_total, 1e-300):
            return False
    return True
