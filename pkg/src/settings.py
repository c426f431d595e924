#!/usr/bin/env python3
"""
解析設定を格納するデータクラス
"""

import math
import os
from typing import Any, Dict, Mapping, Optional

DEFAULT_TRUNCATION = 1e-12
DEFAULT_METHOD = "sum"
DEFAULT_MAX_CUT_SETS = 1_000_000
DEFAULT_EXACT_EVENT_CAP = 24
DEFAULT_BRUTEFORCE_EVENT_CAP = 24

TRUNCATION_ENV = "PRADIC_TRUNCATION"
METHODS = ("sum", "mcub", "exact", "all")


def parse_truncation(value: str, source: str = "--truncation") -> float:
    """
    打ち切り値を解析する

    Args:
        value: 文字列表現（例: "1e-12"）
        source: エラーメッセージに出す設定元

    Returns:
        0以上の有限実数
    """
    try:
        truncation = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{source}: 打ち切り値を数値として解釈できません: {value!r}")
    if not math.isfinite(truncation) or truncation < 0:
        raise ValueError(f"{source}: 打ち切り値は0以上の有限値である必要があります: {value!r}")
    return truncation


class TruncationSettings:
    """打ち切り値設定クラス（CLI > 環境変数 > 既定値）"""

    def __init__(self, truncation: float = DEFAULT_TRUNCATION, source: str = "default"):
        self.truncation = truncation
        self.source = source

    def set_truncation(self, truncation: float, source: str = "cli"):
        """打ち切り値を設定"""
        if not math.isfinite(truncation) or truncation < 0:
            raise ValueError(f"打ち切り値は0以上の有限値である必要があります: {truncation!r}")
        self.truncation = truncation
        self.source = source

    def load_environment(self, environ: Optional[Mapping[str, str]] = None):
        """環境変数 PRADIC_TRUNCATION があれば反映"""
        environ = os.environ if environ is None else environ
        value = environ.get(TRUNCATION_ENV)
        if value is not None and value.strip():
            self.truncation = parse_truncation(value, TRUNCATION_ENV)
            self.source = "env"

    def get_truncation(self) -> float:
        return self.truncation

    def format_status(self) -> str:
        return f"{self.truncation:g} ({self.source})"


class MethodSettings:
    """定量化ヘッドライン手法の設定クラス"""

    def __init__(self, method: str = DEFAULT_METHOD):
        self.method = DEFAULT_METHOD
        self.set_method(method)

    def set_method(self, method: str):
        """手法を設定（sum, mcub, exact, all）"""
        if method not in METHODS:
            raise ValueError(f"無効な定量化手法: {method}（有効: {', '.join(METHODS)}）")
        self.method = method

    def get_method(self) -> str:
        return self.method

    def needs_exact(self) -> bool:
        """厳密計算が必要か"""
        return self.method in ("exact", "all")

    def format_status(self) -> str:
        names = {
            "sum": "稀事象近似",
            "mcub": "MCUB",
            "exact": "厳密",
            "all": "すべて",
        }
        return names.get(self.method, self.method)


class LimitSettings:
    """計算資源の上限設定クラス"""

    def __init__(self, max_cut_sets: int = DEFAULT_MAX_CUT_SETS,
                 exact_event_cap: int = DEFAULT_EXACT_EVENT_CAP,
                 bruteforce_event_cap: int = DEFAULT_BRUTEFORCE_EVENT_CAP):
        """
        初期化

        Args:
            max_cut_sets: カットセット展開中の作業集合の上限
            exact_event_cap: 厳密計算を行う基本事象数の上限
            bruteforce_event_cap: 全状態列挙を行う基本事象数の上限
        """
        self.max_cut_sets = max_cut_sets
        self.exact_event_cap = exact_event_cap
        self.bruteforce_event_cap = bruteforce_event_cap

    def format_status(self) -> str:
        return (f"max_cut_sets={self.max_cut_sets}, exact<={self.exact_event_cap}, "
                f"bruteforce<={self.bruteforce_event_cap}")


class AnalysisSettings:
    """解析設定を統合管理するクラス"""

    def __init__(self):
        self.truncation = TruncationSettings()
        self.method = MethodSettings()
        self.limits = LimitSettings()

    @classmethod
    def from_environment(cls, environ: Optional[Mapping[str, str]] = None) -> 'AnalysisSettings':
        """既定値に環境変数を反映した設定を作る"""
        settings = cls()
        settings.truncation.load_environment(environ)
        return settings

    def copy(self) -> 'AnalysisSettings':
        """独立した複製（打ち切り値の設定元も引き継ぐ）"""
        settings = AnalysisSettings.from_dict(self.to_dict())
        settings.truncation.source = self.truncation.source
        return settings

    def to_dict(self) -> Dict[str, Any]:
        """設定をDict形式にシリアライズ"""
        return {
            "truncation": self.truncation.get_truncation(),
            "method": self.method.get_method(),
            "limits": {
                "max_cut_sets": self.limits.max_cut_sets,
                "exact_event_cap": self.limits.exact_event_cap,
                "bruteforce_event_cap": self.limits.bruteforce_event_cap,
            },
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AnalysisSettings':
        """Dict形式から設定をデシリアライズ"""
        settings = cls()
        if "truncation" in data:
            settings.truncation.set_truncation(float(data["truncation"]), "dict")
        if "method" in data:
            settings.method.set_method(data["method"])
        limits = data.get("limits", {})
        settings.limits = LimitSettings(
            max_cut_sets=limits.get("max_cut_sets", DEFAULT_MAX_CUT_SETS),
            exact_event_cap=limits.get("exact_event_cap", DEFAULT_EXACT_EVENT_CAP),
            bruteforce_event_cap=limits.get("bruteforce_event_cap", DEFAULT_BRUTEFORCE_EVENT_CAP),
        )
        return settings

    def format_status(self) -> str:
        """設定状態を1行にまとめる"""
        return (f"truncation: {self.truncation.format_status()} | "
                f"method: {self.method.format_status()} | {self.limits.format_status()}")
