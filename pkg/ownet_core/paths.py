from __future__ import annotations

import contextlib
import json
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Set

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OutputPaths:
    """Holds the file-system locations of every artifact a run can emit."""

    base_dir: Path

    @property
    def manifest_file(self) -> Path:
        return self.base_dir / "manifest.json"

    @property
    def validation_file(self) -> Path:
        return self.base_dir / "validation.json"

    @property
    def nodes_file(self) -> Path:
        return self.base_dir / "nodes.csv"

    @property
    def edges_file(self) -> Path:
        return self.base_dir / "edges.csv"

    @property
    def roles_file(self) -> Path:
        return self.base_dir / "roles.csv"

    @property
    def components_file(self) -> Path:
        return self.base_dir / "components.csv"

    @property
    def scc_file(self) -> Path:
        return self.base_dir / "scc.csv"

    @property
    def components_summary_file(self) -> Path:
        return self.base_dir / "components.json"

    @property
    def bowtie_labels_file(self) -> Path:
        return self.base_dir / "bowtie_labels.csv"

    @property
    def bowtie_table_file(self) -> Path:
        return self.base_dir / "bowtie_table.csv"

    @property
    def motifs_file(self) -> Path:
        return self.base_dir / "motifs.json"

    def ccdf_file(self, quantity: str) -> Path:
        return self.base_dir / f"stats_{quantity}.csv"

    @property
    def stats_summary_file(self) -> Path:
        return self.base_dir / "stats.json"

    @property
    def control_file(self) -> Path:
        return self.base_dir / "control.csv"

    @property
    def control_stats_file(self) -> Path:
        return self.base_dir / "control_stats.json"

    @property
    def concentration_file(self) -> Path:
        return self.base_dir / "concentration.csv"

    @property
    def concentration_summary_file(self) -> Path:
        return self.base_dir / "concentration.json"

    @property
    def ranking_file(self) -> Path:
        return self.base_dir / "ranking.csv"

    @property
    def groups_file(self) -> Path:
        return self.base_dir / "groups.csv"

    def ensure(self) -> None:
        """Create the base directory if it does not exist."""
        self.base_dir.mkdir(parents=True, exist_ok=True)

    def artifacts(self) -> List[Path]:
        """Return every regular file currently under the base directory."""
        if not self.base_dir.exists():
            return []
        return sorted(path for path in self.base_dir.iterdir() if path.is_file())

    @classmethod
    def default(cls) -> "OutputPaths":
        return cls(base_dir=Path.cwd() / "ownet-out")


def manifest_artifacts(outputs: OutputPaths) -> List[str]:
    """Artifact names listed by the manifest in ``outputs``, if there is one."""
    try:
        manifest = json.loads(outputs.manifest_file.read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return []
    artifacts = manifest.get("artifacts") if isinstance(manifest, dict) else None
    if not isinstance(artifacts, dict):
        return []
    return sorted(name for name in artifacts if name == Path(name).name)


def _remove_stale(target: OutputPaths, produced: Set[str]) -> None:
    for name in manifest_artifacts(target):
        path = target.base_dir / name
        if name not in produced and path.is_file():
            path.unlink()
            logger.debug("removed stale artifact %s", name)


@contextlib.contextmanager
def staged_outputs(target: OutputPaths) -> Iterator[OutputPaths]:
    """Yield a scratch ``OutputPaths`` whose files are published on success.

    Files are written next to the target directory and moved into place only
    when the block exits cleanly. On any exception the scratch directory is
    removed and the target directory is left untouched. When the new files
    include a manifest, artifacts listed by the previous manifest that this
    run did not produce are deleted, so the directory matches its manifest.
    """
    parent = target.base_dir.expanduser().resolve().parent
    parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(
        tempfile.mkdtemp(prefix=f".{target.base_dir.name}.staging-", dir=parent)
    )
    try:
        yield OutputPaths(base_dir=scratch)
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    try:
        target.ensure()
        staged = OutputPaths(base_dir=scratch)
        produced = staged.artifacts()
        if staged.manifest_file in produced:
            _remove_stale(target, {path.name for path in produced})
        for path in produced:
            os.replace(path, target.base_dir / path.name)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
