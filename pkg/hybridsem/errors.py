"""例外クラス

数値入力の不正は DomainError、設定・ファイル内容の不正は ConfigError。
どちらも ValueError を継承するので呼び出し側は ValueError でまとめて捕捉できる。
"""


class DomainError(ValueError):
    """Operation called outside its mathematical domain."""


class ConfigError(ValueError):
    """Invalid configuration value, range or file content."""


class InfeasibleSelection(RuntimeError):
    """Pinned semantic powers leave no budget for the Shannon subcarriers."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual
