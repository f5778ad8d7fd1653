"""Tests module for Grocery Automation API."""
