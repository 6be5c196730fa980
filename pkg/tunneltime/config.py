import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    V_EV = float(os.getenv("TUNNELTIME_V_EV", "0.3"))
    L_NM = float(os.getenv("TUNNELTIME_L_NM", "4.0"))
    M_REL = float(os.getenv("TUNNELTIME_M_REL", "0.067"))
    E_EV = float(os.getenv("TUNNELTIME_E_EV", "0.001"))
    TAIL_TOL = float(os.getenv("TUNNELTIME_TAIL_TOL", "1e-4"))
    # unset: the cap grows with the barrier opacity
    POLE_CAP = int(os.getenv("TUNNELTIME_POLE_CAP", "0")) or None
    WORKERS = int(os.getenv("TUNNELTIME_WORKERS", "0")) or os.cpu_count() or 1
    LOG_LEVEL = os.getenv("TUNNELTIME_LOG_LEVEL", "INFO").upper()
    OUTPUT_DIR = os.getenv("TUNNELTIME_OUTPUT_DIR", "out")
    JSON_SORT_KEYS = False
