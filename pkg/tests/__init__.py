"""Tests for laker-crunchtools."""
