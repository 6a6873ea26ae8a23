# qcloud-lab/utils/__init__.py - Utils Package
