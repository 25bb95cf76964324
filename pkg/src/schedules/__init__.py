"""
Update schedules: generators, censoring, seeded specs and commutation checks.
"""
