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

from .main import main

try:
    from .version import version as __version__
except ImportError:  # source tree without setuptools_scm metadata
    __version__ = "0.0.0+unknown"

__all__ = [
    "main",
    "__version__",
]
