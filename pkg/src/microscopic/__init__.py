"""
スケールした密度の連立系と剰余項のモジュール。
"""
