"""Unit tests for tensorheston modules."""
