# flexmarket
# Copyright (C) 2026 flexmarket contributors
#
# This file is part of flexmarket.
#
# flexmarket is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# flexmarket is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with flexmarket.  If not, see <http://www.gnu.org/licenses/>.

from typing import Any, Dict, Optional


class FlexMarketError(Exception):
    """Base class of all errors raised by flexmarket"""


class ConfigurationError(FlexMarketError, ValueError):
    pass


class ParseError(ConfigurationError):
    def __init__(self, reason: str, *, text: str, what: str = "value"):
        super().__init__(f"Invalid {what} {text!r}: {reason}")
        self.text = text


class ScenarioError(ConfigurationError):
    """A scenario document failed validation.

    Rendered as ``path:line: field: reason``; `line` is 1-based and omitted if
    the offending node could not be located.
    """

    def __init__(
        self,
        reason: str,
        *,
        path: Optional[str] = None,
        line: Optional[int] = None,
        field: Optional[str] = None,
    ):
        self.reason = reason
        self.path = path
        self.line = line
        self.field = field

        location = path if path is not None else "<scenario>"
        if line is not None:
            location = f"{location}:{line}"
        prefix = f"{location}: {field}" if field else location
        super().__init__(f"{prefix}: {reason}")


class SchemaVersionError(ConfigurationError):
    def __init__(self, *, found: Any, expected: int, path: Optional[str] = None):
        where = f" in {path}" if path is not None else ""
        super().__init__(
            f"Unsupported schema_version {found!r}{where} (expected {expected})"
        )


class ModelInfeasibleError(FlexMarketError):
    def __init__(self, reason: str, *, asset: str):
        super().__init__(f"{asset}: {reason}")
        self.asset = asset


class SolverError(FlexMarketError):
    """The LP/MILP solver gave up, typically after hitting its iteration cap"""

    def __init__(self, reason: str, *, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics: Dict[str, Any] = dict(diagnostics or {})
        details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        super().__init__(f"{reason} ({details})" if details else reason)


class ConvexityError(FlexMarketError, ValueError):
    pass


def describe_exception(e: BaseException) -> str:
    """Render an exception together with its chain of causes, one per line"""
    message = [f"{type(e).__name__}: {e}"]

    cause = e.__cause__
    while cause is not None:
        message.append(f"caused by: {cause}")
        cause = cause.__cause__

    return "\n".join(message)
