"""
Hamming and Kantorovich metrics, discrepancy influences and block-dynamics contraction.
"""
