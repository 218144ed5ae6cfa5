"""实验编排：授权卸载流水线、图表 sweep、CSV 输出"""
