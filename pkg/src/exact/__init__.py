"""
Exact distribution propagation, dominance certificates, mixing times and property suites.
"""
