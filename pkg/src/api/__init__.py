"""API module for FastAPI application."""
