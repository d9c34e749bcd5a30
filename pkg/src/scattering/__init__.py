"""
ゼロエネルギー散乱(散乱長)のモジュール。
"""
