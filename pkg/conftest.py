"""
Root conftest: keeps the repository root importable so tests can use `modules.*`.
Tests live in tests/ (configured in pytest.ini).
"""
