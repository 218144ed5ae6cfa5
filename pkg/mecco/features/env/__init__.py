"""联合卸载问题的顺序决策 MDP：一步调度一个设备"""
