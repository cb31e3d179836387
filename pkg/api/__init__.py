"""
Heavytail - REST API Module
"""
