"""Tests for opm-lightshift."""
