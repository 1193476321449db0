"""Compile OBDA specifications with Horn-ALCHIQ ontologies into DL-Lite_R ones."""

__version__ = "0.1.0"
