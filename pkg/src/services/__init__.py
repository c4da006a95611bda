"""
Service layer: curve fitting, UFR extraction, forecasting and reporting.
"""
