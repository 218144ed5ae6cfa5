"""区块链访问控制层（进程内仿真）"""
