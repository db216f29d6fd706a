"""
Data models: scenario configuration, schedules, evaluation reports and jobs.
"""
