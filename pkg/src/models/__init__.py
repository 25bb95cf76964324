"""
Concrete spin models and the graph families they live on.
"""
