"""
L² 距離・収束率・揺らぎ統計のモジュール。
"""
