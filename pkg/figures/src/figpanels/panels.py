"""Panel rendering over drivenbath archives.

A panel spec (JSON) names a figure class, axis cosmetics, and a list of
curve selectors; every selector must resolve to a column of a CSV listed in
a scenario manifest inside the archive directory.  Rendering is a pure view
of the archived data: the only transforms offered are modulus/modulus-square
of the re_/im_ column pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("fnm", "dynamics", "infidelity")


class PanelError(RuntimeError):
    """A selector failed to resolve or a spec is malformed."""


@dataclass(frozen=True)
class Curve:
    scenario: str
    series: str
    column: str
    label: str
    style: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PanelSpec:
    name: str
    kind: str
    output: str
    curves: tuple
    title: str = ""
    x_label: str = "t"
    y_label: str = ""
    x_log: bool = False
    y_log: bool = False

    @classmethod
    def from_file(cls, path) -> "PanelSpec":
        raw = json.loads(Path(path).read_text())
        if raw.get("kind") not in KINDS:
            raise PanelError(f"{path}: kind must be one of {KINDS}")
        if not raw.get("curves"):
            raise PanelError(f"{path}: empty curve selector list")
        curves = tuple(Curve(scenario=c["scenario"], series=c["series"],
                             column=c["column"], label=c.get("label", ""),
                             style=c.get("style", {}))
                       for c in raw["curves"])
        return cls(name=raw["name"], kind=raw["kind"], output=raw["output"],
                   curves=curves, title=raw.get("title", ""),
                   x_label=raw.get("x_label", "t"),
                   y_label=raw.get("y_label", ""),
                   x_log=bool(raw.get("x_log", False)),
                   y_log=bool(raw.get("y_log", False)))


class Archive:
    """Lazy reader over the manifests and CSVs of one output directory."""

    def __init__(self, root):
        self.root = Path(root)
        self._manifests: dict[str, dict] = {}
        self._csv_cache: dict[Path, dict[str, np.ndarray]] = {}
        for mpath in sorted(self.root.glob("*__manifest.json")):
            manifest = json.loads(mpath.read_text())
            self._manifests[manifest["scenario_id"]] = manifest

    def scenario_ids(self):
        return sorted(self._manifests)

    def manifest(self, scenario: str) -> dict:
        if scenario not in self._manifests:
            raise PanelError(
                f"scenario {scenario!r} not in archive; available: "
                f"{', '.join(self.scenario_ids()) or '(none)'}")
        return self._manifests[scenario]

    def _read_csv(self, path: Path) -> dict[str, np.ndarray]:
        if path not in self._csv_cache:
            with open(path) as fh:
                header = fh.readline().strip().split(",")
                data = np.loadtxt(fh, delimiter=",", ndmin=2)
            self._csv_cache[path] = {name: data[:, i]
                                     for i, name in enumerate(header)}
        return self._csv_cache[path]

    def series(self, scenario: str, series: str) -> dict[str, np.ndarray]:
        manifest = self.manifest(scenario)
        for entry in manifest["files"]:
            if entry["series"] == series:
                return self._read_csv(self.root / entry["name"])
        names = ", ".join(e["series"] for e in manifest["files"])
        raise PanelError(f"series {series!r} not in scenario {scenario!r}; "
                         f"available: {names}")

    def column(self, curve: Curve) -> tuple[np.ndarray, np.ndarray]:
        cols = self.series(curve.scenario, curve.series)
        name = curve.column
        if name.startswith(("abs:", "abs2:")):
            prefix, base = name.split(":", 1)
            re_name, im_name = f"re_{base}", f"im_{base}"
            for needed in (re_name, im_name):
                if needed not in cols:
                    raise PanelError(
                        f"column {needed!r} (for {name!r}) not in series "
                        f"{curve.series!r}; available: {', '.join(cols)}")
            mod = np.hypot(cols[re_name], cols[im_name])
            return cols["t"], mod**2 if prefix == "abs2" else mod
        if name not in cols:
            raise PanelError(f"column {name!r} not in series {curve.series!r} "
                             f"of {curve.scenario!r}; available: "
                             f"{', '.join(cols)}")
        return cols["t"], cols[name]


def render_panel(archive: Archive, panel: PanelSpec, out_dir) -> Path:
    """Render one panel to its output file; deterministic bytes."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    try:
        for curve in panel.curves:
            t, y = archive.column(curve)
            ax.plot(t, y, label=curve.label or None, **curve.style)
        if panel.x_log:
            ax.set_xscale("log")
        if panel.y_log:
            ax.set_yscale("log")
        ax.set_xlabel(panel.x_label)
        ax.set_ylabel(panel.y_label)
        if panel.title:
            ax.set_title(panel.title)
        if any(c.label for c in panel.curves):
            ax.legend(fontsize=8)
        out_path = out_dir / panel.output
        metadata = {"Software": "figpanels"}
        if out_path.suffix == ".svg":
            metadata["Date"] = None  # suppress the only timestamp source
        fig.savefig(out_path, metadata=metadata)
    finally:
        plt.close(fig)
    return out_path


def load_panel_dir(panel_dir) -> list[PanelSpec]:
    paths = sorted(Path(panel_dir).glob("*.json"))
    if not paths:
        raise PanelError(f"no panel specs in {panel_dir}")
    return [PanelSpec.from_file(p) for p in paths]
