"""
全局配置：数值容差、并行度、随机种子、输出路径等

所有值均可通过环境变量或项目根目录下的 .env 覆盖。
"""
import os

from dotenv import load_dotenv

# ============================================================
# 项目根目录
# ============================================================
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# 加载 .env 文件（位于项目根目录）
load_dotenv(os.path.join(PROJECT_ROOT, ".env"))

# ============================================================
# 均衡求解器
# ============================================================
SOLVER_TOLERANCE = float(os.getenv("SOLVER_TOLERANCE", "1e-10"))        # 不动点相对容差
SOLVER_MAX_ITERATIONS = int(os.getenv("SOLVER_MAX_ITERATIONS", "200"))  # 二分法最大迭代次数
SECANT_POLISH = os.getenv("SECANT_POLISH", "1") not in ("0", "false", "False")

# 通用分布的部分期望使用自适应积分，绝对容差
QUAD_TOLERANCE = float(os.getenv("QUAD_TOLERANCE", "1e-10"))
QUAD_LIMIT = int(os.getenv("QUAD_LIMIT", "200"))

# 比较静态单调性判定：小于 TIE_FACTOR × 求解容差的反向变化视为持平
MONOTONE_TIE_FACTOR = float(os.getenv("MONOTONE_TIE_FACTOR", "10"))

# 默认非参与价值分布 Q = uniform[0, LEISURE_SCALE × v_S]
LEISURE_SCALE = float(os.getenv("LEISURE_SCALE", "3.0"))

# ============================================================
# 计量模块
# ============================================================
COLLINEARITY_TOLERANCE = float(os.getenv("COLLINEARITY_TOLERANCE", "1e-10"))
DEFAULT_CLUSTER_ADJUSTMENT = os.getenv("DEFAULT_CLUSTER_ADJUSTMENT", "CR1")

# 面板生成时允许被截断到 [0,1] 的单元格比例上限
CLAMP_BUDGET = float(os.getenv("CLAMP_BUDGET", "0.05"))

# ============================================================
# 随机数与并行
# ============================================================
DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", "20080101"))
DEFAULT_JOBS = int(os.getenv("DEFAULT_JOBS", "1"))

# ============================================================
# 日志
# ============================================================
LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING")
PROJECT_LOG_LEVEL = os.getenv("PROJECT_LOG_LEVEL", "INFO")
PROJECT_LOGGERS = ("model", "simulator", "econometrics", "workflow")

# ============================================================
# 文件路径
# ============================================================
PRESETS_DIR = os.path.join(PROJECT_ROOT, "config", "presets")
OUTPUT_DIR = os.getenv("OUTPUT_DIR", os.path.join(PROJECT_ROOT, "output"))
