"""代价模型：速率、边缘/云时延能耗、分配方案约束校验"""
