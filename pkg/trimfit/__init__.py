"""
trimfit - Robust trim fitting with partial incremental sorting
Camera resectioning solvers and the synthetic benchmark built on them
"""
__version__ = "1.0.0"
