"""Gaussian-Dirichlet Random Fields: 空間・時間上のカテゴリ観測のトピックモデル"""

__version__ = "0.1.0"
