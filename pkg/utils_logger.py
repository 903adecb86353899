import logging
import sys
from pathlib import Path
from datetime import datetime

from config_settings import settings

LOG_DIR = Path(settings.log_dir)

try:
    sys.stdout.reconfigure(encoding="utf-8")
    sys.stderr.reconfigure(encoding="utf-8")
except Exception:
    pass


def setup_root_logger(level=None):
    root = logging.getLogger()
    if root.handlers:
        return
    root.setLevel(level or settings.log_level)

    fmt = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")

    ch = logging.StreamHandler(sys.stdout)
    ch.setFormatter(fmt)
    root.addHandler(ch)

    if settings.log_to_file:
        LOG_DIR.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(LOG_DIR / f"log_{datetime.now().date()}.txt", encoding="utf-8")
        fh.setFormatter(fmt)
        root.addHandler(fh)


def get_logger(name: str, level=None):
    setup_root_logger(level)
    return logging.getLogger(name)
