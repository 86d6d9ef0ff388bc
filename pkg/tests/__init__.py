"""Test suite for intentseq."""
