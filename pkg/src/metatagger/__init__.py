"""Morphosyntactic tagging with character, word and meta BiLSTM models."""

__version__ = "0.1.0"
