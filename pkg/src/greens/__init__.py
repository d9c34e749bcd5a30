"""
Yukawa 核・Nyström 演算子・相互作用行列のモジュール。
"""
