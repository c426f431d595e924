#!/usr/bin/env python3
"""
PBF-A（加算型部分ベータファクター）によるベータ推定
"""
import csv
import math
from pathlib import Path
from typing import Dict, Optional

from model import (
    GRADES, SUBFACTORS, BetaTable, FailureDomain, LookupScoreError, Model, ModelFileError, ScoreSheet,
)

# ハードウェア用推定表（全A → 15300/51000 = 0.300）
HARDWARE_TABLE = BetaTable(
    name=FailureDomain.HARDWARE.value,
    cells={
        "Redundancy":    {"A": 1800, "A+": 882, "B": 433, "B+": 212, "C": 104, "D": 25, "E": 6},
        "Separation":    {"A": 2400, "B": 577, "C": 139, "D": 33, "E": 8},
        "Understanding": {"A": 1800, "B": 433, "C": 104, "D": 25, "E": 6},
        "Analysis":      {"A": 1800, "B": 433, "C": 104, "D": 25, "E": 6},
        "MMI":           {"A": 3000, "B": 721, "C": 173, "D": 42, "E": 10},
        "SafetyCulture": {"A": 1500, "B": 360, "C": 87, "D": 21, "E": 5},
        "Control":       {"A": 1800, "B": 433, "C": 104, "D": 25, "E": 6},
        "Tests":         {"A": 1200, "B": 288, "C": 69, "D": 17, "E": 4},
    },
    denominator=51000,
)

# ソフトウェア用推定表（範囲 0.001〜0.999）
SOFTWARE_TABLE = BetaTable(
    name=FailureDomain.SOFTWARE.value,
    cells={
        "Redundancy":    {"A": 23976, "A+": 10112, "B": 4265, "B+": 1799, "C": 759, "D": 135, "E": 24},
        "Separation":    {"A": 23976, "B": 4265, "C": 759, "D": 135, "E": 24},
        "Understanding": {"A": 7992, "B": 1422, "C": 253, "D": 45, "E": 8},
        "Analysis":      {"A": 7992, "B": 1422, "C": 253, "D": 45, "E": 8},
        "MMI":           {"A": 11988, "B": 2132, "C": 379, "D": 67, "E": 12},
        "SafetyCulture": {"A": 6993, "B": 1244, "C": 221, "D": 39, "E": 7},
        "Control":       {"A": 4995, "B": 888, "C": 158, "D": 28, "E": 5},
        "Tests":         {"A": 11988, "B": 2132, "C": 379, "D": 67, "E": 12},
    },
    denominator=100000,
)

BUILTIN_TABLES = {
    HARDWARE_TABLE.name: HARDWARE_TABLE,
    SOFTWARE_TABLE.name: SOFTWARE_TABLE,
}

# 印刷表記・表記揺れ → 正規サブファクター名
SUBFACTOR_ALIASES = {
    "redundancy": "Redundancy",
    "redundancy (& diversity)": "Redundancy",
    "redundancy & diversity": "Redundancy",
    "separation": "Separation",
    "understanding": "Understanding",
    "analysis": "Analysis",
    "mmi": "MMI",
    "safetyculture": "SafetyCulture",
    "safety culture": "SafetyCulture",
    "safety_culture": "SafetyCulture",
    "control": "Control",
    "tests": "Tests",
    "test": "Tests",
}


def normalize_subfactor(name: str) -> str:
    """サブファクター名を正規化（不明ならLookupScoreError）"""
    key = name.strip().lower()
    if key in SUBFACTOR_ALIASES:
        return SUBFACTOR_ALIASES[key]
    raise LookupScoreError(f"不明なサブファクターです: {name!r}")


def normalize_grade(grade: str) -> str:
    """グレードを正規化（大文字化のみ）"""
    value = grade.strip().upper()
    if value not in GRADES:
        raise LookupScoreError(f"不明なグレードです: {grade!r}（有効: {', '.join(GRADES)}）")
    return value


def get_table(name: str, model: Optional[Model] = None) -> BetaTable:
    """
    推定表を取得する（モデル側の上書き表を優先）

    Args:
        name: HARDWARE または SOFTWARE（大文字小文字不問）
        model: 上書き表を持つモデル（省略可）
    """
    key = name.strip().upper()
    if model is not None and key in model.beta_table_map:
        return model.beta_table_map[key]
    if key not in BUILTIN_TABLES:
        raise LookupScoreError(f"不明なベータ推定表です: {name!r}")
    return BUILTIN_TABLES[key]


def interpolate_plus_grade(table: BetaTable, subfactor: str, grade: str) -> int:
    """
    表にないA+/B+を隣接グレードの幾何平均で補間する

    A+ = round(sqrt(A·B)), B+ = round(sqrt(B·C))
    表に値がある行（ハードウェアRedundancyのA+ 882など）はlookup_score側で表の値を優先する
    """
    row = table.cells[subfactor]
    if grade == "A+":
        upper, lower = row["A"], row["B"]
    elif grade == "B+":
        upper, lower = row["B"], row["C"]
    else:
        raise LookupScoreError(f"補間できるのはA+とB+のみです: {grade}")
    return int(math.floor(math.sqrt(upper * lower) + 0.5))


def lookup_score(table: BetaTable, subfactor: str, grade: str) -> int:
    """
    サブファクターとグレードから数値スコアを引く

    Args:
        table: ベータ推定表
        subfactor: サブファクター名（表記揺れ可）
        grade: A, A+, B, B+, C, D, E

    Returns:
        表の値。A+/B+が表にない行は幾何平均で補間した値
    """
    name = normalize_subfactor(subfactor)
    grade = normalize_grade(grade)
    row = table.cells.get(name)
    if row is None:
        raise LookupScoreError(f"推定表 {table.name} に行がありません: {name}")
    if grade in row:
        return row[grade]
    return interpolate_plus_grade(table, name, grade)


def estimate_beta(table: BetaTable, sheet: ScoreSheet) -> float:
    """
    スコアシートからベータを推定する（β = Σスコア / d、途中丸めなし）
    """
    missing = [s for s in SUBFACTORS if s not in sheet.grades]
    if missing:
        raise LookupScoreError(f"未評価のサブファクターがあります: {', '.join(missing)}")
    total = sum(lookup_score(table, subfactor, sheet.grades[subfactor]) for subfactor in SUBFACTORS)
    return total / table.denominator


def score_breakdown(table: BetaTable, sheet: ScoreSheet) -> Dict[str, int]:
    """サブファクター別スコア（表の行順）"""
    return {subfactor: lookup_score(table, subfactor, sheet.grades[subfactor]) for subfactor in SUBFACTORS}


def make_score_sheet(name: str, table: str, grades: Dict[str, str]) -> ScoreSheet:
    """
    表記揺れを正規化してスコアシートを作る（重複評価はエラー）
    """
    normalized: Dict[str, str] = {}
    for subfactor, grade in grades.items():
        key = normalize_subfactor(subfactor)
        if key in normalized:
            raise LookupScoreError(f"サブファクターが重複しています: {key}")
        normalized[key] = normalize_grade(grade)
    missing = [s for s in SUBFACTORS if s not in normalized]
    if missing:
        raise LookupScoreError(f"未評価のサブファクターがあります: {', '.join(missing)}")
    return ScoreSheet(name=name, table=table.strip().upper(), grades=normalized)


def read_score_csv(path: str, table: str, name: Optional[str] = None) -> ScoreSheet:
    """
    スコアシートCSV（1行1サブファクター: subfactor,grade）を読み込む

    ヘッダー行 "subfactor,grade" は省略可。空行と#で始まる行は無視
    """
    csv_path = Path(path)
    try:
        with open(csv_path, 'r', encoding='utf-8', newline='') as f:
            rows = list(csv.reader(f))
    except UnicodeDecodeError as e:
        raise ModelFileError(f"UTF-8として読み込めません: {e.reason}", path=str(csv_path))
    except OSError as e:
        raise ModelFileError(f"読み込めません: {e.strerror or e}", path=str(csv_path))

    grades: Dict[str, str] = {}
    for line_number, row in enumerate(rows, start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if len(row) != 2:
            raise LookupScoreError(f"{csv_path}:{line_number}: 列数は2である必要があります: {row}")
        subfactor, grade = row[0].strip(), row[1].strip()
        if subfactor.lower() == "subfactor" and grade.lower() == "grade":
            continue
        key = normalize_subfactor(subfactor)
        if key in grades:
            raise LookupScoreError(f"{csv_path}:{line_number}: サブファクターが重複しています: {key}")
        grades[key] = grade
    return make_score_sheet(name or csv_path.stem, table, grades)


def parse_inline_scores(text: str, table: str, name: str = "inline") -> ScoreSheet:
    """
    インライン指定のスコアを解析する

    形式:
        "Redundancy=B+,Separation=E,..." （サブファクター=グレード）
        "B+,E,A,D,C,E,D,C" （表の行順に8個）
        "A" （全サブファクター同一グレード）
    """
    parts = [part.strip() for part in text.split(",") if part.strip()]
    if not parts:
        raise LookupScoreError("スコア指定が空です")

    if all("=" in part for part in parts):
        grades = {}
        for part in parts:
            subfactor, grade = part.split("=", 1)
            key = normalize_subfactor(subfactor)
            if key in grades:
                raise LookupScoreError(f"サブファクターが重複しています: {key}")
            grades[key] = grade
    elif any("=" in part for part in parts):
        raise LookupScoreError("名前付きと位置指定を混在させることはできません")
    elif len(parts) == 1:
        grades = {subfactor: parts[0] for subfactor in SUBFACTORS}
    elif len(parts) == len(SUBFACTORS):
        grades = dict(zip(SUBFACTORS, parts))
    else:
        raise LookupScoreError(f"位置指定のグレードは1個か{len(SUBFACTORS)}個です（実際: {len(parts)}）")

    return make_score_sheet(name, table, grades)
