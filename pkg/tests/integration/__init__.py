"""Integration tests for tensorheston."""
