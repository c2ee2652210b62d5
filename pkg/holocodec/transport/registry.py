"""Pre-distributed codebooks: books/<channel>/<K>.rvqc, one (bottom, top) pair per size id."""
from __future__ import annotations

import logging
from pathlib import Path

from holocodec.errors import CorruptStreamError, RegistryMissError
from holocodec.vq.codebook import Codebook, load_codebooks

logger = logging.getLogger("holocodec")


class CodebookRegistry:
    """Read-only map (channel id, size id) -> (bottom, top) codebooks."""

    def __init__(self, entries: dict[tuple[int, int], tuple[Codebook, Codebook]] | None = None):
        self._entries: dict[tuple[int, int], tuple[Codebook, Codebook]] = {}
        for (channel, size_id), pair in (entries or {}).items():
            self._add(channel, size_id, pair)

    def _add(self, channel: int, size_id: int, pair: tuple[Codebook, Codebook]) -> None:
        bottom, top = pair
        if bottom.size != size_id:
            raise CorruptStreamError(f"size id {size_id} holds a bottom codebook of size {bottom.size}")
        self._entries[(channel, size_id)] = (bottom.detached(), top.detached())

    @classmethod
    def load(cls, root: str | Path) -> CodebookRegistry:
        """Scan *root*/<channel>/<K>.rvqc; every file must pass its checksums."""
        registry = cls()
        root = Path(root)
        for path in sorted(root.glob("*/*.rvqc")):
            try:
                channel, size_id = int(path.parent.name), int(path.stem)
            except ValueError:
                logger.warning("Skipping %s: not a <channel>/<K>.rvqc path", path)
                continue
            books = load_codebooks(path)
            if len(books) != 2:
                raise CorruptStreamError(f"{path} must hold a bottom and a top codebook, found {len(books)}")
            registry._add(channel, size_id, (books[0], books[1]))
        logger.info("Loaded %d codebook pair(s) from %s", len(registry), root)
        return registry

    def get(self, channel: int, size_id: int) -> tuple[Codebook, Codebook]:
        try:
            return self._entries[(channel, size_id)]
        except KeyError:
            raise RegistryMissError(f"no codebooks for channel {channel}, size {size_id}") from None

    def sizes(self, channel: int) -> list[int]:
        return sorted(k for ch, k in self._entries if ch == channel)

    def channels(self) -> list[int]:
        return sorted({ch for ch, _ in self._entries})

    def __contains__(self, key: tuple[int, int]) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)
