"""
シード・並列実行・成果物書き出しのモジュール。
"""
