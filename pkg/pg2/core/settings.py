from decouple import config

# Process-level settings (.env or environment); hyperparameters live in the run config
RUNS_DIR = config("PG2_RUNS_DIR", default="./runs")
LOG_LEVEL = config("PG2_LOG_LEVEL", default="INFO")
DEVICE = config("PG2_DEVICE", default="cpu")
NUM_WORKERS = config("PG2_NUM_WORKERS", default=0, cast=int)
DEBUG = config("PG2_DEBUG", default=False, cast=bool)
PROGRESS = config("PG2_PROGRESS", default=True, cast=bool)

# Deterministic kernels where torch offers them
DETERMINISTIC = config("PG2_DETERMINISTIC", default=True, cast=bool)
