"""LG transports for :func:`mbgp.campaign.run_campaign`.

A fixture directory holds one sub-directory per router::

    <dir>/<router>/summary.txt
    <dir>/<router>/detail/<a.b.c.d>.txt
"""
from __future__ import annotations

import urllib.error
import urllib.parse
import urllib.request
from pathlib import Path

from .campaign import DETAIL_COMMAND, SUMMARY_COMMAND, TransportError, TransportUnavailable


def fixture_path(root, router: str, command: str) -> Path:
    root = Path(root)
    if command == SUMMARY_COMMAND:
        return root / router / "summary.txt"
    prefix = DETAIL_COMMAND.format("")
    if command.startswith(prefix):
        return root / router / "detail" / f"{command[len(prefix):].strip()}.txt"
    raise TransportError(f"unsupported command {command!r}")


def write_fixture(root, router: str, command: str, body: str) -> Path:
    path = fixture_path(root, router, command)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(body)
    return path


class FixtureTransport:
    def __init__(self, root):
        self.root = Path(root)
        if not self.root.is_dir():
            raise FileNotFoundError(f"fixture directory {self.root} does not exist")

    def routers(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if (p / "summary.txt").is_file())

    def __call__(self, router: str, command: str) -> str:
        path = fixture_path(self.root, router, command)
        try:
            return path.read_text()
        except FileNotFoundError:
            raise TransportError(f"no fixture for {command!r} on {router}") from None


class HttpTransport:
    """Queries a web LG.

    ``url_template`` receives ``{router}`` and ``{command}`` (both URL
    encoded), e.g. ``https://lg.example.net/?router={router}&cmd={command}``.
    Connection failures are raised as :class:`TransportUnavailable` so the
    campaign stops instead of burning its retries on every target.
    """

    def __init__(self, url_template: str, timeout: float = 30.0):
        self.url_template = url_template
        self.timeout = timeout

    def __call__(self, router: str, command: str) -> str:
        url = self.url_template.format(router=urllib.parse.quote(router),
                                       command=urllib.parse.quote(command))
        try:
            with urllib.request.urlopen(url, timeout=self.timeout) as resp:
                return resp.read().decode("utf-8", errors="replace")
        except urllib.error.HTTPError as exc:
            raise TransportError(f"HTTP {exc.code} for {command!r} on {router}") from exc
        except (urllib.error.URLError, OSError) as exc:
            raise TransportUnavailable(str(exc)) from exc
