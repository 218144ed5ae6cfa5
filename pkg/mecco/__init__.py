"""mecco - 多用户边缘-云计算卸载仿真与求解（区块链访问控制 + ADRLO）"""

__version__ = "0.1.0"
