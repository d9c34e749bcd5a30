"""
障害物の配置密度・標本化・正則性のモジュール。
"""
