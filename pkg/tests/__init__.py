"""Tests for apl-survival."""
