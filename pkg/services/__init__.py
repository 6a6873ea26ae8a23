# qcloud-lab/services/__init__.py - Services Package
