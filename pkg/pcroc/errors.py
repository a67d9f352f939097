from __future__ import annotations

from typing import Any, Optional

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_NOT_CONVERGED = 4


class PairedRocError(Exception):
    exit_code = 1


class GameLogError(PairedRocError, ValueError):
    exit_code = EXIT_INPUT

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(PairedRocError, ValueError):
    exit_code = EXIT_INPUT


class ConnectivityError(PairedRocError):
    """Ford's condition fails, so no unique constrained MLE exists."""

    exit_code = EXIT_DEGENERATE

    def __init__(self, result: Any) -> None:
        self.result = result
        strong, rest = result.witness
        super().__init__(
            "win graph is not strongly connected: no team in "
            f"{sorted(rest)} has beaten a team in {sorted(strong)}"
        )


class DegenerateClassError(PairedRocError):
    exit_code = EXIT_DEGENERATE


class ConvergenceError(PairedRocError):
    exit_code = EXIT_NOT_CONVERGED


class TaylorRadicandWarning(RuntimeWarning):
    pass
