# tests/__init__.py - Test Package