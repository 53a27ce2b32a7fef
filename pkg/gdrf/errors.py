"""エラー階層

CLIはここで定義した exit_code をそのまま終了コードとして返す。
- 2: 設定エラー
- 3: データ取込エラー
- 4: 数値計算エラー
"""


class GdrfError(Exception):
    """全エラーの基底クラス"""

    exit_code = 1


class ContractViolation(GdrfError, ValueError):
    """呼び出し側の契約違反（インデックス範囲外、負のカウント等）"""


class ConfigError(GdrfError):
    """設定値の検証エラー。全ての問題点をまとめて報告する。"""

    exit_code = 2

    def __init__(self, message: str, problems: list[str] | None = None):
        self.problems = problems or []
        if self.problems:
            message = message + "\n" + "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(message)


class IngestionError(GdrfError):
    """観測データ取込エラー。問題のある行番号を全て保持する。"""

    exit_code = 3

    def __init__(
        self,
        message: str,
        lines: list[int] | None = None,
        problems: list[str] | None = None,
    ):
        self.lines = lines or []
        self.problems = problems or []
        if self.problems:
            shown = self.problems[:50]
            message = message + "\n" + "\n".join(f"  - {p}" for p in shown)
            if len(self.problems) > len(shown):
                message += f"\n  ... and {len(self.problems) - len(shown)} more"
        super().__init__(message)


class NumericalError(GdrfError):
    """数値計算の失敗（Cholesky分解失敗、非有限値など）"""

    exit_code = 4

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)
