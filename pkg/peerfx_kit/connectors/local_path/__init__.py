"""Local filesystem connector."""
