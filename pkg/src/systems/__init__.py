"""
Spin systems: graphs, configurations, Gibbs measures and their certification.
"""
