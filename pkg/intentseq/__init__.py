"""intentseq - pedestrian crossing-intent sequence models on pose landmarks."""

__version__ = "1.0.0"
