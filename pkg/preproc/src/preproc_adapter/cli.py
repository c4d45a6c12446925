import sys

import click

from .annotate import annotate_segments
from .config import AdapterConfig
from .emit import emit_metadata
from .errors import AdapterError
from .segmenter import extract_segments


@click.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True),
              help="JSON file with AdapterConfig fields.")
@click.option("--name", default="collection",
              help="Collection name written into the metadata.")
def main(config_path, name):
    """Preprocess a media directory into collection metadata."""
    try:
        config = AdapterConfig.from_file(config_path)
        boundaries, durations, warnings = extract_segments(
            config.media_dir, window_s=config.window_s, depth=config.depth)
        for warning in warnings:
            click.echo(f"warning: {warning}", err=True)
        records = annotate_segments(boundaries, config)
        out = emit_metadata(records, durations, config.output_path, name=name)
    except (AdapterError, ValueError, TypeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    flagged = sum(1 for r in records if r.flags)
    click.echo(f"{len(records)} segments from {len(durations)} sources "
               f"({flagged} flagged) -> {out}")


if __name__ == "__main__":
    main()
