"""
極限(有効)問題の電荷方程式モジュール。
"""
