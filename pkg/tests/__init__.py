"""tensorheston test suite."""
