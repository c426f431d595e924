#!/usr/bin/env python3
"""
モデルファイル（JSON、厳格スキーマ）の読み込みと書き出し
"""
import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Type

from model import (
    DEFAULT_END_STATES, FORMAT_VERSION, BasicEvent, BbnNetwork, BbnNode, BetaTable, BranchOutcome,
    BranchPoint, Cccg, ComponentGroup, EventKind, EventTree, FailureDomain, FaultTree, Gate, GateOp,
    InitiatingEvent, InputKind, Model, ModelFileError, Outcome, RedundancyLevel, ScoreSheet, Sequence,
    validate,
)

FIXTURES_DIR = Path(__file__).resolve().parent.parent / "fixtures"

SECTIONS = (
    "basic_events",
    "gates",
    "fault_trees",
    "event_trees",
    "component_groups",
    "cccgs",
    "score_sheets",
    "beta_tables",
    "bbn_networks",
)
TOP_LEVEL_KEYS = ("format_version", "provenance") + SECTIONS


def _reject_constant(name: str):
    raise ValueError(f"JSONで表現できない数値です: {name}")


def _no_duplicate_keys(pairs: List[Tuple[str, Any]]) -> Dict[str, Any]:
    result = {}
    for key, value in pairs:
        if key in result:
            raise ValueError(f"キーが重複しています: {key!r}")
        result[key] = value
    return result


class _Reader:
    """パス付きでスキーマ検査しながら値を取り出す"""

    def __init__(self, path: str):
        self.path = path

    def fail(self, where: str, message: str):
        raise ModelFileError(f"{where}: {message}", path=self.path)

    def object(self, value, where: str, required: Tuple[str, ...], optional: Tuple[str, ...] = ()) -> Dict[str, Any]:
        if not isinstance(value, dict):
            self.fail(where, "オブジェクトである必要があります")
        unknown = sorted(set(value) - set(required) - set(optional))
        if unknown:
            self.fail(where, f"不明なキーがあります: {', '.join(unknown)}")
        missing = [key for key in required if key not in value]
        if missing:
            self.fail(where, f"必須キーがありません: {', '.join(missing)}")
        return value

    def string(self, value, where: str) -> str:
        if not isinstance(value, str):
            self.fail(where, "文字列である必要があります")
        return value

    def optional_string(self, value, where: str) -> Optional[str]:
        return None if value is None else self.string(value, where)

    def number(self, value, where: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(where, "数値である必要があります")
        return float(value)

    def optional_number(self, value, where: str) -> Optional[float]:
        return None if value is None else self.number(value, where)

    def integer(self, value, where: str) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(where, "整数である必要があります")
        return value

    def boolean(self, value, where: str) -> bool:
        if not isinstance(value, bool):
            self.fail(where, "真偽値である必要があります")
        return value

    def strings(self, value, where: str) -> Tuple[str, ...]:
        if not isinstance(value, list):
            self.fail(where, "配列である必要があります")
        return tuple(self.string(item, f"{where}[{i}]") for i, item in enumerate(value))

    def array(self, value, where: str) -> list:
        if not isinstance(value, list):
            self.fail(where, "配列である必要があります")
        return value

    def enum(self, enum_type: Type[Enum], value, where: str):
        text = self.string(value, where)
        try:
            return enum_type(text)
        except ValueError:
            allowed = ", ".join(member.value for member in enum_type)
            self.fail(where, f"不明な値です: {text}（有効: {allowed}）")

    def optional_enum(self, enum_type: Type[Enum], value, where: str):
        return None if value is None else self.enum(enum_type, value, where)


def _basic_event(r: _Reader, data, where: str) -> BasicEvent:
    d = r.object(data, where, ("id", "probability"),
                 ("description", "kind", "failure_domain", "uca_category", "redundancy_level"))
    return BasicEvent(
        id=r.string(d["id"], f"{where}.id"),
        probability=r.number(d["probability"], f"{where}.probability"),
        description=r.string(d.get("description", ""), f"{where}.description"),
        kind=r.enum(EventKind, d.get("kind", EventKind.INDEPENDENT.value), f"{where}.kind"),
        failure_domain=r.enum(FailureDomain, d.get("failure_domain", FailureDomain.OTHER.value),
                              f"{where}.failure_domain"),
        uca_category=r.optional_string(d.get("uca_category"), f"{where}.uca_category"),
        redundancy_level=r.optional_enum(RedundancyLevel, d.get("redundancy_level"), f"{where}.redundancy_level"),
    )


def _gate(r: _Reader, data, where: str) -> Gate:
    d = r.object(data, where, ("id", "op", "children"), ("k", "description"))
    return Gate(
        id=r.string(d["id"], f"{where}.id"),
        op=r.enum(GateOp, d["op"], f"{where}.op"),
        children=r.strings(d["children"], f"{where}.children"),
        k=None if d.get("k") is None else r.integer(d["k"], f"{where}.k"),
        description=r.string(d.get("description", ""), f"{where}.description"),
    )


def _fault_tree(r: _Reader, data, where: str) -> FaultTree:
    d = r.object(data, where, ("name", "top"), ("description",))
    return FaultTree(
        name=r.string(d["name"], f"{where}.name"),
        top=r.string(d["top"], f"{where}.top"),
        description=r.string(d.get("description", ""), f"{where}.description"),
    )


def _event_tree(r: _Reader, data, where: str) -> EventTree:
    d = r.object(data, where, ("name", "initiating_event", "branch_points", "sequences"),
                 ("end_states", "description"))
    ie = r.object(d["initiating_event"], f"{where}.initiating_event", ("id", "frequency"), ("description",))

    branch_points = []
    for i, item in enumerate(r.array(d["branch_points"], f"{where}.branch_points")):
        at = f"{where}.branch_points[{i}]"
        bp = r.object(item, at, ("label",), ("fault_tree", "probability"))
        branch_points.append(BranchPoint(
            label=r.string(bp["label"], f"{at}.label"),
            fault_tree=r.optional_string(bp.get("fault_tree"), f"{at}.fault_tree"),
            probability=r.optional_number(bp.get("probability"), f"{at}.probability"),
        ))

    sequences = []
    for i, item in enumerate(r.array(d["sequences"], f"{where}.sequences")):
        at = f"{where}.sequences[{i}]"
        seq = r.object(item, at, ("id", "outcomes", "end_state"))
        outcomes = []
        for j, out in enumerate(r.array(seq["outcomes"], f"{at}.outcomes")):
            o = r.object(out, f"{at}.outcomes[{j}]", ("branch", "outcome"))
            outcomes.append(BranchOutcome(
                branch=r.string(o["branch"], f"{at}.outcomes[{j}].branch"),
                outcome=r.enum(Outcome, o["outcome"], f"{at}.outcomes[{j}].outcome"),
            ))
        sequences.append(Sequence(
            id=r.string(seq["id"], f"{at}.id"),
            outcomes=tuple(outcomes),
            end_state=r.string(seq["end_state"], f"{at}.end_state"),
        ))

    return EventTree(
        name=r.string(d["name"], f"{where}.name"),
        initiating_event=InitiatingEvent(
            id=r.string(ie["id"], f"{where}.initiating_event.id"),
            frequency=r.number(ie["frequency"], f"{where}.initiating_event.frequency"),
            description=r.string(ie.get("description", ""), f"{where}.initiating_event.description"),
        ),
        branch_points=tuple(branch_points),
        sequences=tuple(sequences),
        end_states=r.strings(d["end_states"], f"{where}.end_states") if "end_states" in d else DEFAULT_END_STATES,
        description=r.string(d.get("description", ""), f"{where}.description"),
    )


def _component_group(r: _Reader, data, where: str) -> ComponentGroup:
    d = r.object(data, where, ("name", "component_ids", "failure_domain", "input_kind", "input_probability"),
                 ("expanded", "description"))
    return ComponentGroup(
        name=r.string(d["name"], f"{where}.name"),
        component_ids=r.strings(d["component_ids"], f"{where}.component_ids"),
        failure_domain=r.enum(FailureDomain, d["failure_domain"], f"{where}.failure_domain"),
        input_kind=r.enum(InputKind, d["input_kind"], f"{where}.input_kind"),
        input_probability=r.number(d["input_probability"], f"{where}.input_probability"),
        expanded=r.boolean(d.get("expanded", False), f"{where}.expanded"),
        description=r.string(d.get("description", ""), f"{where}.description"),
    )


def _cccg(r: _Reader, data, where: str) -> Cccg:
    d = r.object(data, where, ("id", "group", "members"),
                 ("coupling_factors", "beta", "score_sheet", "redundancy_level"))
    return Cccg(
        id=r.string(d["id"], f"{where}.id"),
        group=r.string(d["group"], f"{where}.group"),
        members=r.strings(d["members"], f"{where}.members"),
        coupling_factors=r.strings(d.get("coupling_factors", []), f"{where}.coupling_factors"),
        beta=r.optional_number(d.get("beta"), f"{where}.beta"),
        score_sheet=r.optional_string(d.get("score_sheet"), f"{where}.score_sheet"),
        redundancy_level=r.optional_enum(RedundancyLevel, d.get("redundancy_level"), f"{where}.redundancy_level"),
    )


def _score_sheet(r: _Reader, data, where: str) -> ScoreSheet:
    d = r.object(data, where, ("name", "table", "grades"))
    grades = r.object(d["grades"], f"{where}.grades", (), tuple(d["grades"]) if isinstance(d["grades"], dict) else ())
    return ScoreSheet(
        name=r.string(d["name"], f"{where}.name"),
        table=r.string(d["table"], f"{where}.table"),
        grades={r.string(k, f"{where}.grades"): r.string(v, f"{where}.grades.{k}") for k, v in grades.items()},
    )


def _beta_table(r: _Reader, data, where: str) -> BetaTable:
    d = r.object(data, where, ("name", "cells", "denominator"))
    cells_data = r.object(d["cells"], f"{where}.cells", (),
                          tuple(d["cells"]) if isinstance(d["cells"], dict) else ())
    cells = {}
    for subfactor, row in cells_data.items():
        row = r.object(row, f"{where}.cells.{subfactor}", (), tuple(row) if isinstance(row, dict) else ())
        cells[subfactor] = {grade: r.integer(value, f"{where}.cells.{subfactor}.{grade}") for grade, value in row.items()}
    return BetaTable(
        name=r.string(d["name"], f"{where}.name"),
        cells=cells,
        denominator=r.number(d["denominator"], f"{where}.denominator"),
    )


def _bbn_node(r: _Reader, data, where: str) -> BbnNode:
    d = r.object(data, where, ("id", "states", "cpt"), ("parents",))
    node_id = r.string(d["id"], f"{where}.id")
    states = r.strings(d["states"], f"{where}.states")
    parents = r.strings(d.get("parents", []), f"{where}.parents")

    cpt = {}
    for i, item in enumerate(r.array(d["cpt"], f"{where}.cpt")):
        at = f"{where}.cpt[{i}]"
        row = r.object(item, at, ("distribution",), ("given",))
        given = r.object(row.get("given", {}), f"{at}.given", parents)
        key = tuple(r.string(given[p], f"{at}.given.{p}") for p in parents)
        if key in cpt:
            r.fail(at, f"親状態の組み合わせが重複しています: {key}")
        distribution = r.object(row["distribution"], f"{at}.distribution", states)
        cpt[key] = tuple(r.number(distribution[s], f"{at}.distribution.{s}") for s in states)
    return BbnNode(id=node_id, states=states, parents=parents, cpt=cpt)


def _bbn_network(r: _Reader, data, where: str) -> BbnNetwork:
    d = r.object(data, where, ("name", "nodes"),
                 ("faults_node", "faults_state", "sfp_generic", "p_faults_generic", "description"))
    nodes = tuple(_bbn_node(r, node, f"{where}.nodes[{i}]")
                  for i, node in enumerate(r.array(d["nodes"], f"{where}.nodes")))
    return BbnNetwork(
        name=r.string(d["name"], f"{where}.name"),
        nodes=nodes,
        faults_node=r.optional_string(d.get("faults_node"), f"{where}.faults_node"),
        faults_state=r.optional_string(d.get("faults_state"), f"{where}.faults_state"),
        sfp_generic=r.optional_number(d.get("sfp_generic"), f"{where}.sfp_generic"),
        p_faults_generic=r.optional_number(d.get("p_faults_generic"), f"{where}.p_faults_generic"),
        description=r.string(d.get("description", ""), f"{where}.description"),
    )


_SECTION_PARSERS = {
    "basic_events": _basic_event,
    "gates": _gate,
    "fault_trees": _fault_tree,
    "event_trees": _event_tree,
    "component_groups": _component_group,
    "cccgs": _cccg,
    "score_sheets": _score_sheet,
    "beta_tables": _beta_table,
    "bbn_networks": _bbn_network,
}


def parse_model(data, path: str = "<input>") -> Model:
    """
    JSONから読み込んだ値をModelに変換する（スキーマ検査のみ、整合性検証はしない）
    """
    r = _Reader(path)
    d = r.object(data, "$", ("format_version",), TOP_LEVEL_KEYS)
    version = r.integer(d["format_version"], "$.format_version")
    if version != FORMAT_VERSION:
        r.fail("$.format_version", f"未対応のバージョンです: {version}（対応: {FORMAT_VERSION}）")

    sections = {}
    for section in SECTIONS:
        items = r.array(d.get(section, []), f"$.{section}")
        parser = _SECTION_PARSERS[section]
        sections[section] = tuple(parser(r, item, f"$.{section}[{i}]") for i, item in enumerate(items))

    return Model(
        provenance=r.string(d.get("provenance", ""), "$.provenance"),
        format_version=version,
        **sections,
    )


def load_model_text(text: str, path: str = "<input>", check: bool = True) -> Model:
    """
    モデルファイルの文字列を読み込む

    Args:
        text: JSON文字列
        path: エラー表示用のパス
        check: Trueなら整合性検証し、エラーがあればModelFileError

    Raises:
        ModelFileError: 構文・スキーマ・整合性のエラー（diagnosticsに詳細）
    """
    try:
        data = json.loads(text, object_pairs_hook=_no_duplicate_keys, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ModelFileError(f"構文エラー: {e.msg}", path=path, line=e.lineno, column=e.colno)
    except ValueError as e:
        raise ModelFileError(f"構文エラー: {e}", path=path)

    model = parse_model(data, path)
    if check:
        diagnostics = validate(model)
        errors = [d for d in diagnostics if d.severity == "error"]
        if errors:
            raise ModelFileError(f"モデルの検証で {len(errors)} 件のエラーがあります", path=path,
                                 diagnostics=diagnostics)
    return model


def resolve_model_path(name: str) -> Path:
    """パスが存在しなければ同梱フィクスチャ名として解決する（rts_demo → fixtures/rts_demo.json）"""
    path = Path(name)
    if path.exists():
        return path
    for candidate in (FIXTURES_DIR / name, FIXTURES_DIR / f"{name}.json"):
        if candidate.exists():
            return candidate
    return path


def load_model(path, check: bool = True) -> Model:
    """モデルファイルを読み込む（UTF-8）"""
    resolved = resolve_model_path(str(path))
    try:
        text = resolved.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ModelFileError("ファイルが見つかりません", path=str(path))
    except UnicodeDecodeError as e:
        raise ModelFileError(f"UTF-8として読み込めません: {e.reason}", path=str(resolved))
    except OSError as e:
        raise ModelFileError(f"読み込めません: {e.strerror or e}", path=str(resolved))
    return load_model_text(text, str(resolved), check)


def _drop_defaults(d: Dict[str, Any], defaults: Dict[str, Any]) -> Dict[str, Any]:
    return {k: v for k, v in d.items() if k not in defaults or v != defaults[k]}


def _enum_value(value):
    return value.value if isinstance(value, Enum) else value


def to_data(model: Model) -> Dict[str, Any]:
    """ModelをJSON化できる値に変換する（既定値のキーは省略）"""
    data: Dict[str, Any] = {"format_version": model.format_version}
    if model.provenance:
        data["provenance"] = model.provenance

    data["basic_events"] = [_drop_defaults({
        "id": e.id,
        "probability": e.probability,
        "description": e.description,
        "kind": e.kind.value,
        "failure_domain": e.failure_domain.value,
        "uca_category": e.uca_category,
        "redundancy_level": _enum_value(e.redundancy_level),
    }, {"description": "", "kind": EventKind.INDEPENDENT.value, "failure_domain": FailureDomain.OTHER.value,
        "uca_category": None, "redundancy_level": None}) for e in model.basic_events]

    data["gates"] = [_drop_defaults({
        "id": g.id,
        "op": g.op.value,
        "k": g.k,
        "children": list(g.children),
        "description": g.description,
    }, {"k": None, "description": ""}) for g in model.gates]

    data["fault_trees"] = [_drop_defaults({
        "name": ft.name,
        "top": ft.top,
        "description": ft.description,
    }, {"description": ""}) for ft in model.fault_trees]

    data["event_trees"] = [_drop_defaults({
        "name": et.name,
        "description": et.description,
        "initiating_event": _drop_defaults({
            "id": et.initiating_event.id,
            "frequency": et.initiating_event.frequency,
            "description": et.initiating_event.description,
        }, {"description": ""}),
        "end_states": list(et.end_states),
        "branch_points": [_drop_defaults({
            "label": bp.label,
            "fault_tree": bp.fault_tree,
            "probability": bp.probability,
        }, {"fault_tree": None, "probability": None}) for bp in et.branch_points],
        "sequences": [{
            "id": seq.id,
            "outcomes": [{"branch": o.branch, "outcome": o.outcome.value} for o in seq.outcomes],
            "end_state": seq.end_state,
        } for seq in et.sequences],
    }, {"description": "", "end_states": list(DEFAULT_END_STATES)}) for et in model.event_trees]

    data["component_groups"] = [_drop_defaults({
        "name": g.name,
        "description": g.description,
        "component_ids": list(g.component_ids),
        "failure_domain": g.failure_domain.value,
        "input_kind": g.input_kind.value,
        "input_probability": g.input_probability,
        "expanded": g.expanded,
    }, {"description": "", "expanded": False}) for g in model.component_groups]

    data["cccgs"] = [_drop_defaults({
        "id": c.id,
        "group": c.group,
        "members": list(c.members),
        "coupling_factors": list(c.coupling_factors),
        "beta": c.beta,
        "score_sheet": c.score_sheet,
        "redundancy_level": _enum_value(c.redundancy_level),
    }, {"coupling_factors": [], "beta": None, "score_sheet": None, "redundancy_level": None}) for c in model.cccgs]

    data["score_sheets"] = [{
        "name": s.name,
        "table": s.table,
        "grades": dict(s.grades),
    } for s in model.score_sheets]

    data["beta_tables"] = [{
        "name": t.name,
        "denominator": t.denominator,
        "cells": {subfactor: dict(row) for subfactor, row in t.cells.items()},
    } for t in model.beta_tables]

    data["bbn_networks"] = [_drop_defaults({
        "name": n.name,
        "description": n.description,
        "faults_node": n.faults_node,
        "faults_state": n.faults_state,
        "sfp_generic": n.sfp_generic,
        "p_faults_generic": n.p_faults_generic,
        "nodes": [{
            "id": node.id,
            "states": list(node.states),
            "parents": list(node.parents),
            "cpt": [{
                "given": dict(zip(node.parents, key)),
                "distribution": dict(zip(node.states, row)),
            } for key, row in node.cpt.items()],
        } for node in n.nodes],
    }, {"description": "", "faults_node": None, "faults_state": None, "sfp_generic": None,
        "p_faults_generic": None}) for n in model.bbn_networks]

    return {key: value for key, value in data.items() if value != [] or key not in SECTIONS}


def serialize(model: Model) -> str:
    """モデルをJSON文字列にする（キー順固定、末尾改行あり）"""
    return json.dumps(to_data(model), ensure_ascii=False, indent=2) + "\n"


def write_model(model: Model, path):
    """モデルをUTF-8で書き出す"""
    output = Path(path)
    try:
        output.parent.mkdir(parents=True, exist_ok=True)
        with open(output, "w", encoding="utf-8", newline="\n") as f:
            f.write(serialize(model))
    except OSError as e:
        raise ModelFileError(f"書き込めません: {e.strerror or e}", path=str(output))
