"""RL post-training machinery and data-curation pipelines with a toy harness."""

__version__ = "0.1.0"
