import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class AdapterConfig:
    """Run configuration; model ids are configuration, not contract."""

    media_dir: str
    output_path: str
    caption_model_id: str = "stub"
    embedding_model_id: str = "stub"
    frames_per_segment: int = 16
    embedding_dim: int = 16
    depth: int = 2  # hierarchy levels in fallback segmentation
    window_s: float = 4.0  # level-0 window in fallback segmentation
    device: str = "cpu"
    seed: int = 0
    keyframes_dir: str = field(default="")

    def __post_init__(self):
        if self.frames_per_segment < 1:
            raise ValueError("frames_per_segment must be >= 1")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.window_s < 1.0:
            raise ValueError("window_s must be >= 1.0")
        if not self.keyframes_dir:
            self.keyframes_dir = str(
                Path(self.output_path).parent / "keyframes")

    @classmethod
    def from_file(cls, path: str | Path) -> "AdapterConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**data)
