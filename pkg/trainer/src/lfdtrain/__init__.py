"""Reference trainer, weight exporter, and fixture generator for the
bilateral road-segmentation engine. Talks to the inference package only
through its external interfaces: slot manifests, the .lfdw container, and
PNG files."""

__version__ = "1.0.0"
