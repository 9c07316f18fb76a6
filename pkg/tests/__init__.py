"""Tests for the blab-reporter package."""
