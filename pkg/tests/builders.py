"""
テスト用のモデル組み立てと乱数モデル生成、総当たりの参照実装
"""
import itertools
import math
import random
from typing import Dict, List, Optional, Sequence, Set, Tuple

from model import (
    BasicEvent, BbnNetwork, BbnNode, BranchOutcome, BranchPoint, EventKind, EventTree, FaultTree,
    Gate, GateOp, InitiatingEvent, Model, Outcome, Sequence as EtSequence,
)


def event(event_id: str, probability: float, kind: EventKind = EventKind.INDEPENDENT) -> BasicEvent:
    return BasicEvent(id=event_id, probability=probability, kind=kind)


def gate(gate_id: str, op: str, *children: str, k: Optional[int] = None) -> Gate:
    return Gate(id=gate_id, op=GateOp(op), children=tuple(children), k=k)


def tree_model(probabilities: Dict[str, float], gates: Sequence[Gate], top: str = "TOP",
               name: str = "FT", house: Sequence[str] = ()) -> Model:
    """基本事象の確率とゲートから1本のフォールトツリーを持つモデルを作る"""
    events = tuple(
        event(e, p, EventKind.HOUSE if e in house else EventKind.INDEPENDENT)
        for e, p in sorted(probabilities.items())
    )
    return Model(basic_events=events, gates=tuple(gates), fault_trees=(FaultTree(name, top),))


def random_coherent_tree(rng: random.Random, max_events: int = 10) -> Model:
    """
    AND/OR/KOFNだけからなる乱数フォールトツリー

    子ノードは先に作った基本事象・ゲートから選ぶので循環しない。部分木の共有はある
    """
    n_events = rng.randint(2, max_events)
    probabilities = {f"E{i:02d}": rng.uniform(0.01, 0.6) for i in range(n_events)}
    pool = list(probabilities)
    gates = []
    for i in range(rng.randint(1, 6)):
        size = rng.randint(2, min(4, len(pool)))
        children = rng.sample(pool, size)
        op = rng.choice(["AND", "OR", "KOFN"])
        gate_id = f"G{i:02d}"
        if op == "KOFN":
            gates.append(gate(gate_id, op, *children, k=rng.randint(1, size)))
        else:
            gates.append(gate(gate_id, op, *children))
        pool.append(gate_id)
    return tree_model(probabilities, gates, top=gates[-1].id)


def reachable_events(model: Model, top: str) -> List[str]:
    seen: Set[str] = set()
    stack = [top]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        if node in model.gate_map:
            stack.extend(model.gate_map[node].children)
    return sorted(node for node in seen if node in model.event_map)


def truth_table(model: Model, top: str) -> Tuple[List[str], int]:
    """
    全状態での頂上事象の真偽を整数のビット列で返す（状態sのビットが立てば真）
    """
    events = reachable_events(model, top)
    n_states = 1 << len(events)
    columns: Dict[str, int] = {}
    for i, e in enumerate(events):
        columns[e] = sum(1 << s for s in range(n_states) if s >> i & 1)
    full = (1 << n_states) - 1

    def value(node: str) -> int:
        if node in columns:
            return columns[node]
        g = model.gate_map[node]
        children = [value(child) for child in g.children]
        if g.op == GateOp.AND:
            result = full
            for c in children:
                result &= c
        elif g.op == GateOp.OR:
            result = 0
            for c in children:
                result |= c
        else:
            result = 0
            for combo in itertools.combinations(children, g.k):
                term = full
                for c in combo:
                    term &= c
                result |= term
        columns[node] = result
        return result

    return events, value(top)


def prime_implicants(model: Model, top: str) -> Set[Tuple[str, ...]]:
    """単調関数の極小な真の状態（＝最小カットセット）"""
    events, table = truth_table(model, top)
    result = set()
    for s in range(1 << len(events)):
        if not table >> s & 1:
            continue
        if all(not table >> (s & ~(1 << i)) & 1 for i in range(len(events)) if s >> i & 1):
            result.add(tuple(events[i] for i in range(len(events)) if s >> i & 1))
    return result


def truth_table_probability(model: Model, top: str) -> float:
    events, table = truth_table(model, top)
    probabilities = [model.event_map[e].probability for e in events]
    terms = []
    for s in range(1 << len(events)):
        if table >> s & 1:
            p = 1.0
            for i, q in enumerate(probabilities):
                p *= q if s >> i & 1 else 1.0 - q
            terms.append(p)
    return math.fsum(terms)


def inclusion_exclusion(cut_sets: Sequence[Sequence[str]], probabilities: Dict[str, float]) -> float:
    terms = []
    for r in range(1, len(cut_sets) + 1):
        for combo in itertools.combinations(cut_sets, r):
            union = set().union(*combo)
            terms.append((-1) ** (r + 1) * math.prod(probabilities[e] for e in union))
    return math.fsum(terms)


def fixed_branch_tree(name: str, frequency: float, probabilities: Sequence[float]) -> EventTree:
    """固定確率の分岐点だけを持ち、全経路をシーケンスとして列挙したイベントツリー"""
    labels = [f"B{i}" for i in range(len(probabilities))]
    sequences = []
    for i, outcomes in enumerate(itertools.product([Outcome.SUCCESS, Outcome.FAILURE], repeat=len(labels))):
        sequences.append(EtSequence(
            id=f"{name}:{i + 1:02d}",
            outcomes=tuple(BranchOutcome(label, outcome) for label, outcome in zip(labels, outcomes)),
            end_state="CD" if Outcome.FAILURE in outcomes else "OK",
        ))
    return EventTree(
        name=name,
        initiating_event=InitiatingEvent(f"IE-{name}", frequency),
        branch_points=tuple(BranchPoint(label, probability=p) for label, p in zip(labels, probabilities)),
        sequences=tuple(sequences),
    )


def binary_node(node_id: str, parents: Sequence[str], rows: Dict[Tuple[str, ...], float]) -> BbnNode:
    """状態 (T, F) のノード。rowsは親状態 → P(T)"""
    return BbnNode(
        id=node_id,
        states=("T", "F"),
        parents=tuple(parents),
        cpt={key: (p, 1.0 - p) for key, p in rows.items()},
    )


def random_network(rng: random.Random, max_nodes: int = 10) -> BbnNetwork:
    """2値ノードの乱数DAG（親は先に作ったノードから最大3つ）"""
    nodes = []
    for i in range(rng.randint(1, max_nodes)):
        node_id = f"N{i:02d}"
        earlier = [n.id for n in nodes]
        parents = rng.sample(earlier, rng.randint(0, min(3, len(earlier))))
        rows = {key: rng.uniform(0.05, 0.95) for key in itertools.product(("T", "F"), repeat=len(parents))}
        nodes.append(binary_node(node_id, parents, rows))
    return BbnNetwork(name="RANDOM", nodes=tuple(nodes))
