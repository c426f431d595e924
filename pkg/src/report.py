#!/usr/bin/env python3
"""
レポートの数値整形とCSV入出力
"""
import math
from typing import Dict, List, Optional, TextIO

import pandas as pd
from rich.table import Table

from beta_table import score_breakdown
from ccf_engine import BetaBreakdown
from et_engine import Comparison, ComparisonRow, SequenceResult
from ft_engine import QuantResult, TopComparison
from model import SUBFACTORS, BetaTable, ModelFileError, ScoreSheet

CUT_SET_COLUMNS = ["rank", "probability", "percent", "events"]
SEQUENCE_COLUMNS = ["sequence", "end_state", "frequency", "cut_sets"]
COMPARISON_COLUMNS = ["sequence", "baseline_cdf", "improved_cdf", "delta_pct", "baseline_cutsets", "improved_cutsets"]
DETAIL_COLUMNS = ["improved_share_pct", "delta_share_pct"]
TOP_COMPARISON_COLUMNS = ["fault_tree", "baseline_probability", "improved_probability", "delta_pct",
                          "baseline_cutsets", "improved_cutsets"]

APPROXIMATION_NOTE = "成功分岐はスカラー補数（1 − P）で近似しています"


def format_sci(value: Optional[float], digits: int = 4) -> str:
    """
    有効数字digits桁の指数表記（例: 1.270E-6, 5.000E-1）

    指数は符号付き・ゼロ埋めなし。ロケールに依存しない
    """
    if value is None:
        return ""
    if value == 0.0:
        value = 0.0  # -0.0
    if math.isnan(value):
        return "nan"
    mantissa, exponent = f"{value:.{digits - 1}E}".split("E")
    return f"{mantissa}E{int(exponent):+d}"


def format_percent(value: Optional[float], sign: bool = True) -> str:
    """小数2桁の百分率（例: -70.40%）"""
    if value is None:
        return ""
    text = f"{value:.2f}"
    if text in ("-0.00", "0.00"):
        text = "0.00"
    return f"{text}%" if sign else text


def format_beta(beta: float) -> str:
    """betaを有効数字6桁で（例: 0.300000）"""
    return f"{beta:#.6g}"


def write_csv(frame: pd.DataFrame, stream: TextIO):
    """改行コードLFでCSVを書き出す"""
    frame.to_csv(stream, index=False, lineterminator="\n")


def cut_set_frame(result: QuantResult) -> pd.DataFrame:
    """カットセット表（rank,probability,percent,events）"""
    rows = [{
        "rank": rank,
        "probability": format_sci(cs.probability),
        "percent": format_percent(percent, sign=False),
        "events": cs.format_events(),
    } for rank, (cs, percent) in enumerate(zip(result.cut_sets, result.contributions), start=1)]
    return pd.DataFrame(rows, columns=CUT_SET_COLUMNS)


def headline_lines(result: QuantResult, method: str) -> List[str]:
    """定量化の見出し行（手法ごと）"""
    lines = [f"# top={result.top} cut_sets={len(result.cut_sets)} truncation={format_sci(result.truncation)}"]
    if method == "all":
        lines.append(f"# sum={format_sci(result.rare_event_sum)}")
        lines.append(f"# mcub={format_sci(result.mcub)}")
        lines.append(f"# exact={format_sci(result.exact) if result.exact is not None else 'n/a'}")
    else:
        lines.append(f"# {method}={format_sci(result.headline(method))}")
        if method != "mcub":
            lines.append(f"# mcub={format_sci(result.mcub)}")
    lines.append(f"# truncated_mass_bound={format_sci(result.truncated_mass_bound)}")
    return lines


def sequence_frame(results: List[SequenceResult]) -> pd.DataFrame:
    """シーケンス表（sequence,end_state,frequency,cut_sets）"""
    rows = [{
        "sequence": r.sequence,
        "end_state": r.end_state,
        "frequency": format_sci(r.frequency),
        "cut_sets": "" if r.cut_set_count is None else str(r.cut_set_count),
    } for r in results]
    return pd.DataFrame(rows, columns=SEQUENCE_COLUMNS)


def read_sequence_csv(path: str) -> List[SequenceResult]:
    """
    シーケンス結果CSVを読み込む

    必須列: sequence, frequency。省略可: end_state（既定CD）, cut_sets
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, comment="#")
    except FileNotFoundError:
        raise ModelFileError("ファイルが見つかりません", path=str(path))
    except UnicodeDecodeError as e:
        raise ModelFileError(f"UTF-8として読み込めません: {e.reason}", path=str(path))
    except OSError as e:
        raise ModelFileError(f"読み込めません: {e.strerror or e}", path=str(path))
    except pd.errors.EmptyDataError:
        raise ModelFileError("CSVが空です", path=str(path))
    except pd.errors.ParserError as e:
        raise ModelFileError(f"CSVの構文エラー: {e}", path=str(path))

    missing = [column for column in ("sequence", "frequency") if column not in frame.columns]
    if missing:
        raise ModelFileError(f"必須列がありません: {', '.join(missing)}", path=str(path))

    results = []
    for i, row in enumerate(frame.to_dict("records"), start=2):
        try:
            frequency = float(row["frequency"])
        except ValueError:
            raise ModelFileError(f"frequencyを数値として解釈できません: {row['frequency']!r}", path=str(path), line=i)
        if not math.isfinite(frequency) or frequency < 0:
            raise ModelFileError(f"frequencyは0以上である必要があります: {row['frequency']!r}", path=str(path), line=i)
        cut_sets = (row.get("cut_sets") or "").strip()
        try:
            count = int(cut_sets) if cut_sets else None
        except ValueError:
            raise ModelFileError(f"cut_setsを整数として解釈できません: {cut_sets!r}", path=str(path), line=i)
        results.append(SequenceResult(
            sequence=row["sequence"].strip(),
            end_state=(row.get("end_state") or "CD").strip(),
            frequency=frequency,
            cut_set_count=count,
        ))

    ids = [r.sequence for r in results]
    duplicated = sorted({s for s in ids if ids.count(s) > 1})
    if duplicated:
        raise ModelFileError(f"シーケンスidが重複しています: {', '.join(duplicated)}", path=str(path))
    return results


def _comparison_record(row: ComparisonRow, detail: bool) -> Dict[str, str]:
    record = {
        "sequence": row.sequence,
        "baseline_cdf": format_sci(row.baseline),
        "improved_cdf": format_sci(row.improved),
        "delta_pct": format_percent(row.delta_percent) if row.delta_percent is not None else row.flag,
        "baseline_cutsets": "" if row.baseline_cut_sets is None else str(row.baseline_cut_sets),
        "improved_cutsets": "" if row.improved_cut_sets is None else str(row.improved_cut_sets),
    }
    if detail:
        record["improved_share_pct"] = format_percent(row.improved_share_pct)
        record["delta_share_pct"] = format_percent(row.delta_share_pct)
    return record


def comparison_frame(comparison: Comparison, detail: bool = False) -> pd.DataFrame:
    """比較表（合計行を最後に含む）"""
    columns = COMPARISON_COLUMNS + (DETAIL_COLUMNS if detail else [])
    rows = [_comparison_record(row, detail) for row in comparison.rows]
    rows.append(_comparison_record(comparison.total, detail))
    return pd.DataFrame(rows, columns=columns)


def top_comparison_frame(rows: List[TopComparison]) -> pd.DataFrame:
    """フォールトツリー比較表（合計行なし）"""
    records = [{
        "fault_tree": row.fault_tree,
        "baseline_probability": format_sci(row.baseline),
        "improved_probability": format_sci(row.improved),
        "delta_pct": format_percent(row.delta_percent) if row.delta_percent is not None else row.flag,
        "baseline_cutsets": "" if row.baseline_cut_sets is None else str(row.baseline_cut_sets),
        "improved_cutsets": "" if row.improved_cut_sets is None else str(row.improved_cut_sets),
    } for row in rows]
    return pd.DataFrame(records, columns=TOP_COMPARISON_COLUMNS)

def score_table(table: BetaTable, sheet: ScoreSheet, beta: float) -> Table:
    """サブファクター別スコアのrich表"""
    scores = score_breakdown(table, sheet)
    view = Table(title=f"{table.name} β = {format_beta(beta)}")
    view.add_column("subfactor")
    view.add_column("grade")
    view.add_column("score", justify="right")
    for subfactor in SUBFACTORS:
        view.add_row(subfactor, sheet.grades[subfactor], str(scores[subfactor]))
    view.add_row("Total", "", str(sum(scores.values())), style="bold")
    return view


def breakdown_table(breakdown: BetaBreakdown) -> Table:
    """BetaBreakdownのrich表"""
    view = Table(title=f"{breakdown.group}: Q_t={format_sci(breakdown.q_total)} "
                       f"β_t={format_beta(breakdown.beta_total)} Q_I={format_sci(breakdown.q_independent)}")
    view.add_column("CCCG")
    view.add_column("beta", justify="right")
    view.add_column("P(CCCG)", justify="right")
    for cccg_id, beta in breakdown.beta_per_cccg.items():
        view.add_row(cccg_id, format_beta(beta), format_sci(breakdown.p_per_cccg[cccg_id]))
    return view


def breakdown_lines(breakdown: BetaBreakdown) -> List[str]:
    """BetaBreakdownの機械可読な行（key=value）"""
    lines = [
        f"group={breakdown.group}",
        f"q_total={format_sci(breakdown.q_total)}",
        f"beta_total={format_beta(breakdown.beta_total)}",
        f"q_independent={format_sci(breakdown.q_independent)}",
    ]
    for cccg_id, beta in breakdown.beta_per_cccg.items():
        lines.append(f"cccg={cccg_id} beta={format_beta(beta)} p={format_sci(breakdown.p_per_cccg[cccg_id])}")
    return lines
