#!/usr/bin/env python3
"""
pradic: デジタルI&C向け確率論的リスク評価のコマンドライン
"""
import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional

from rich.console import Console

import report
from bbn import calibrate_phi, infer_marginal, sfp_pipeline
from beta_table import estimate_beta, get_table, parse_inline_scores, read_score_csv, score_breakdown
from ccf_engine import expand_all
from et_engine import compare_models, end_state_totals, solve_event_tree
from ft_engine import compare_fault_trees, single_points_of_failure, solve_fault_tree
from model import SUBFACTORS, Diagnostic, ModelFileError, PradicError, ResourceLimitError, validate
from model_file import load_model, serialize, write_model
from settings import METHODS, AnalysisSettings, parse_truncation

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_USAGE = 2

console = Console(stderr=True)


class UsageError(Exception):
    """引数の誤り（終了コード2）"""


def error_rule(error: Exception) -> str:
    """例外クラス名をケバブケースのルール名にする（ModelError → model-error）"""
    name = type(error).__name__
    return "".join("-" + c.lower() if c.isupper() and i else c.lower() for i, c in enumerate(name))


def emit_diagnostics(diagnostics: List[Diagnostic]):
    for diagnostic in diagnostics:
        print(diagnostic.format(), file=sys.stderr)


def parse_evidence(items: Optional[List[str]]) -> Dict[str, str]:
    """["node=state", ...] → {node: state}"""
    evidence = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--evidence は node=state 形式です: {item!r}")
        node, state = (part.strip() for part in item.split("=", 1))
        if node in evidence:
            raise UsageError(f"--evidence のノードが重複しています: {node}")
        evidence[node] = state
    return evidence


def _truncation_arg(value: str) -> float:
    try:
        return parse_truncation(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


class PradicCommand:
    """サブコマンドを同名メソッドに振り分ける"""

    def __init__(self, stdout=None):
        self.stdout = stdout or sys.stdout

    def create_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(prog="pradic", description="デジタルI&C向けPRA解析ツール")
        subparsers = parser.add_subparsers(dest="command", help="利用可能なコマンド")

        beta_parser = subparsers.add_parser("beta", help="スコアシートからbetaを推定")
        beta_parser.add_argument("--table", required=True, type=str.lower, choices=["hardware", "software"],
                                 help="ベータ推定表")
        beta_parser.add_argument("--scores", required=True,
                                 help="スコアCSVのパス、またはインライン指定（例: A / B+,E,A,D,C,E,D,C）")

        ccf_parser = subparsers.add_parser("ccf", help="CCFモデリング")
        ccf_sub = ccf_parser.add_subparsers(dest="action")
        expand_parser = ccf_sub.add_parser("expand", help="コンポーネントグループを独立事象とCCF事象に展開")
        expand_parser.add_argument("model", help="モデルファイル（またはフィクスチャ名）")
        expand_parser.add_argument("--out", help="出力先（省略時は標準出力）")

        ft_parser = subparsers.add_parser("ft", help="フォールトツリー解析")
        ft_sub = ft_parser.add_subparsers(dest="action")
        solve_parser = ft_sub.add_parser("solve", help="最小カットセットと頂上事象確率")
        solve_parser.add_argument("model", help="モデルファイル（またはフィクスチャ名）")
        solve_parser.add_argument("--top", required=True, help="フォールトツリー名（またはゲートid）")
        solve_parser.add_argument("--truncation", type=_truncation_arg, help="打ち切り値（既定 1e-12）")
        solve_parser.add_argument("--method", choices=METHODS, default="sum", help="見出しの定量化手法")
        solve_parser.add_argument("--out", help="カットセットCSVの出力先")
        ft_compare = ft_sub.add_parser("compare", help="改良前後のモデルでフォールトツリーを比較（Δ%%）")
        ft_compare.add_argument("baseline", help="基準モデル（またはフィクスチャ名）")
        ft_compare.add_argument("improved", help="改良モデル（またはフィクスチャ名）")
        ft_compare.add_argument("--top", required=True, action="append", help="フォールトツリー名（複数指定可）")
        ft_compare.add_argument("--truncation", type=_truncation_arg, help="打ち切り値（既定 1e-12）")
        ft_compare.add_argument("--method", choices=["sum", "mcub", "exact"], default="sum",
                                help="比較に使う定量化手法")
        ft_compare.add_argument("--out", help="比較CSVの出力先")

        et_parser = subparsers.add_parser("et", help="イベントツリー解析")
        et_sub = et_parser.add_subparsers(dest="action")
        et_solve = et_sub.add_parser("solve", help="シーケンス頻度")
        et_solve.add_argument("model", help="モデルファイル（またはフィクスチャ名）")
        et_solve.add_argument("--tree", required=True, help="イベントツリー名")
        et_solve.add_argument("--truncation", type=_truncation_arg, help="打ち切り値（既定 1e-12）")
        et_solve.add_argument("--method", choices=["sum", "mcub", "exact"], default="sum",
                              help="分岐確率に使う定量化手法")
        et_solve.add_argument("--out", help="シーケンスCSVの出力先")

        compare_parser = subparsers.add_parser("compare", help="シーケンス結果の比較（Δ%%）")
        compare_parser.add_argument("baseline", help="基準モデルのシーケンスCSV")
        compare_parser.add_argument("improved", help="改良モデルのシーケンスCSV")
        compare_parser.add_argument("--detail", action="store_true", help="寄与率の列を追加")
        compare_parser.add_argument("--out", help="比較CSVの出力先")

        bbn_parser = subparsers.add_parser("bbn", help="ベイジアンネットワーク")
        bbn_sub = bbn_parser.add_subparsers(dest="action")
        infer_parser = bbn_sub.add_parser("infer", help="事後周辺分布")
        infer_parser.add_argument("model", help="モデルファイル（またはフィクスチャ名）")
        infer_parser.add_argument("--network", required=True, help="BBN名")
        infer_parser.add_argument("--query", required=True, help="問い合わせノード")
        infer_parser.add_argument("--evidence", nargs="*", metavar="NODE=STATE", help="観測値")

        sfp_parser = subparsers.add_parser("sfp", help="SFP推定とCCF分解")
        sfp_parser.add_argument("model", help="モデルファイル（またはフィクスチャ名）")
        sfp_parser.add_argument("--network", required=True, help="BBN名")
        sfp_parser.add_argument("--group", help="分解するコンポーネントグループ")
        sfp_parser.add_argument("--phi-from", nargs=2, type=float, metavar=("SFP_G", "PF_G"),
                                help="φの校正値（省略時はネットワークの値）")
        sfp_parser.add_argument("--evidence", nargs="*", metavar="NODE=STATE", help="観測値")

        return parser

    def _settings(self, args) -> AnalysisSettings:
        try:
            settings = AnalysisSettings.from_environment()
        except ValueError as e:
            raise UsageError(str(e))
        if getattr(args, "truncation", None) is not None:
            settings.truncation.set_truncation(args.truncation, "cli")
        if getattr(args, "method", None) is not None:
            settings.method.set_method(args.method)
        return settings

    def _write_frame(self, frame, out: Optional[str]):
        if out:
            path = Path(out)
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path, "w", encoding="utf-8", newline="") as f:
                    report.write_csv(frame, f)
            except OSError as e:
                raise ModelFileError(f"書き込めません: {e.strerror or e}", path=str(path))
            console.print(f"[dim]{path} に出力しました[/dim]")
        else:
            report.write_csv(frame, self.stdout)

    def beta(self, args) -> int:
        table_name = args.table.upper()
        if Path(args.scores).is_file():
            sheet = read_score_csv(args.scores, table_name)
        else:
            sheet = parse_inline_scores(args.scores, table_name)
        table = get_table(table_name)
        beta = estimate_beta(table, sheet)

        print(report.format_beta(beta), file=self.stdout)
        scores = score_breakdown(table, sheet)
        print("subfactor,grade,score", file=self.stdout)
        for subfactor in SUBFACTORS:
            print(f"{subfactor},{sheet.grades[subfactor]},{scores[subfactor]}", file=self.stdout)
        print(f"Total,,{sum(scores.values())}", file=self.stdout)
        console.print(report.score_table(table, sheet, beta))
        return EXIT_OK

    def ccf(self, args) -> int:
        if args.action != "expand":
            raise UsageError("ccf のサブコマンドを指定してください: expand")
        model = load_model(args.model)
        expanded, breakdowns, diagnostics = expand_all(model)
        for breakdown in breakdowns.values():
            console.print(report.breakdown_table(breakdown))
        emit_diagnostics(diagnostics)

        problems = [d for d in validate(expanded) if d.severity == "error"]
        if problems:
            emit_diagnostics(problems)
            return EXIT_DIAGNOSTICS

        if args.out:
            write_model(expanded, args.out)
            console.print(f"[dim]{args.out} に出力しました[/dim]")
        else:
            self.stdout.write(serialize(expanded))
        return EXIT_OK

    def ft(self, args) -> int:
        if args.action == "compare":
            return self.ft_compare(args)
        if args.action != "solve":
            raise UsageError("ft のサブコマンドを指定してください: solve, compare")
        model = load_model(args.model)
        settings = self._settings(args)
        result = solve_fault_tree(model, args.top, settings)

        for line in report.headline_lines(result, settings.method.get_method()):
            print(line, file=self.stdout)
        spof = single_points_of_failure(result)
        print(f"# spof={len(spof)}" + (f" ({';'.join(cs.events[0] for cs in spof)})" if spof else ""),
              file=self.stdout)
        self._write_frame(report.cut_set_frame(result), args.out)
        return EXIT_OK

    def ft_compare(self, args) -> int:
        baseline = load_model(args.baseline)
        improved = load_model(args.improved)
        settings = self._settings(args)
        rows = compare_fault_trees(baseline, improved, args.top, settings)

        self._write_frame(report.top_comparison_frame(rows), args.out)
        for row in rows:
            if row.flag:
                console.print(f"[yellow]{row.fault_tree}: {row.flag}[/yellow]")
        return EXIT_OK

    def et(self, args) -> int:
        if args.action != "solve":
            raise UsageError("et のサブコマンドを指定してください: solve")
        model = load_model(args.model)
        settings = self._settings(args)
        results = solve_event_tree(model.get_event_tree(args.tree), model, settings=settings)

        self._write_frame(report.sequence_frame(results), args.out)
        for end_state, total in end_state_totals(results).items():
            console.print(f"{end_state}: {report.format_sci(total)}")
        console.print(f"[dim]{report.APPROXIMATION_NOTE}[/dim]")
        return EXIT_OK

    def compare(self, args) -> int:
        baseline = report.read_sequence_csv(args.baseline)
        improved = report.read_sequence_csv(args.improved)
        comparison = compare_models(baseline, improved)

        self._write_frame(report.comparison_frame(comparison, args.detail), args.out)
        flagged = [row for row in comparison.rows if row.flag]
        for row in flagged:
            console.print(f"[yellow]{row.sequence}: {row.flag}[/yellow]")
        return EXIT_OK

    def bbn(self, args) -> int:
        if args.action != "infer":
            raise UsageError("bbn のサブコマンドを指定してください: infer")
        model = load_model(args.model)
        network = model.get_network(args.network)
        marginal = infer_marginal(network, args.query, parse_evidence(args.evidence))
        if marginal.contradictory:
            emit_diagnostics([Diagnostic(f"{network.name}/{args.query}", "contradictory-evidence",
                                         "証拠の確率が0です")])
            return EXIT_DIAGNOSTICS

        print("state,probability", file=self.stdout)
        for state, probability in zip(marginal.states, marginal.probabilities):
            print(f"{state},{probability:.12g}", file=self.stdout)
        return EXIT_OK

    def sfp(self, args) -> int:
        model = load_model(args.model)
        calibration = calibrate_phi(*args.phi_from) if args.phi_from else None
        result = sfp_pipeline(model, args.network, args.group, calibration, parse_evidence(args.evidence))

        print(f"p_faults={result.p_faults:.12g}", file=self.stdout)
        print(f"phi={result.calibration.phi:.12g}", file=self.stdout)
        print(f"sfp={report.format_sci(result.sfp)}", file=self.stdout)
        if result.breakdown is not None:
            for line in report.breakdown_lines(result.breakdown):
                print(line, file=self.stdout)
            console.print(report.breakdown_table(result.breakdown))
        return EXIT_OK

    def execute(self, args_list: Optional[List[str]] = None) -> int:
        """コマンドを実行して終了コードを返す"""
        parser = self.create_parser()
        args = parser.parse_args(args_list)
        if not args.command:
            parser.print_help(sys.stderr)
            return EXIT_USAGE

        try:
            return getattr(self, args.command)(args)
        except UsageError as e:
            print(f"error: usage: {args.command}: {e}", file=sys.stderr)
            return EXIT_USAGE
        except ModelFileError as e:
            if e.diagnostics:
                emit_diagnostics(e.diagnostics)
            print(f"error: {error_rule(e)}: {e.location()}: {e}", file=sys.stderr)
            return EXIT_DIAGNOSTICS
        except ResourceLimitError as e:
            print(f"error: resource-limit: {e.limit_name}={e.limit}: {e}", file=sys.stderr)
            return EXIT_DIAGNOSTICS
        except PradicError as e:
            print(f"error: {error_rule(e)}: {args.command}: {e}", file=sys.stderr)
            return EXIT_DIAGNOSTICS


def main():
    sys.exit(PradicCommand().execute())


if __name__ == "__main__":
    main()
