"""
ポテンシャルと球グリッドの求積モジュール。
"""
