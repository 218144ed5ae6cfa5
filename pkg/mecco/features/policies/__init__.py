"""基线策略（EO / CO / 均分消融 / RANDOM）、学习策略、穷举 oracle 与评估"""
