"""Test suite for the differentiable SAR renderer."""
