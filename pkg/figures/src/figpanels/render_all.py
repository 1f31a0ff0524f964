"""Render every panel spec against an archive directory."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .panels import Archive, PanelError, load_panel_dir, render_panel

DEFAULT_PANEL_DIR = Path(__file__).resolve().parents[3] / "panels"


def build_parser(kind: str | None = None) -> argparse.ArgumentParser:
    what = f"{kind} panels" if kind else "all panels"
    p = argparse.ArgumentParser(description=f"render {what} from an archive")
    p.add_argument("--archive", required=True,
                   help="directory with drivenbath manifests and CSVs")
    p.add_argument("--panels", default=str(DEFAULT_PANEL_DIR),
                   help="directory of panel spec JSON files")
    p.add_argument("--out", default="figs")
    return p


def render_kind(archive_dir, panel_dir, out_dir, kind: str | None) -> list[Path]:
    archive = Archive(archive_dir)
    panels = load_panel_dir(panel_dir)
    if kind is not None:
        panels = [p for p in panels if p.kind == kind]
    written = []
    for panel in panels:
        written.append(render_panel(archive, panel, out_dir))
        print(f"rendered {panel.name} -> {written[-1]}")
    return written


def main(argv=None, kind: str | None = None) -> int:
    args = build_parser(kind).parse_args(argv)
    try:
        written = render_kind(args.archive, args.panels, args.out, kind)
    except PanelError as exc:
        print(f"panel error: {exc}", file=sys.stderr)
        return 1
    print(f"{len(written)} panel(s) rendered")
    return 0


if __name__ == "__main__":
    sys.exit(main())
