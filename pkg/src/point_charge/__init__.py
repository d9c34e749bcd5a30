"""
点電荷系と Green 関数場のモジュール。
"""
