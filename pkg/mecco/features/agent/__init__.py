"""ADRLO / DRLO 学习器：numpy 实现的 Q 网络、Adam、经验回放与训练循环"""
