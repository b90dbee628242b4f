"""Process-level settings read from the environment (and an optional .env file)."""
import logging
import os

import psutil
from dotenv import load_dotenv

load_dotenv()

# ---------------- WORKERS ----------------
def worker_cap():
    """Maximum number of worker threads, from PEFT_FORGE_THREADS."""
    raw = os.getenv("PEFT_FORGE_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logging.getLogger(__name__).warning("ignoring non-integer PEFT_FORGE_THREADS=%r", raw)
    return max(1, psutil.cpu_count(logical=True) or 1)


# ---------------- LOGGING ----------------
LOG_LEVEL = os.getenv("PEFT_FORGE_LOG_LEVEL", "INFO").upper()

# ---------------- RESULTS ----------------
RESULTS_DIR = os.getenv("PEFT_FORGE_RESULTS_DIR", "results")

# ---------------- INFLUXDB CONFIG (optional sink) ----------------
INFLUX_URL = os.getenv("INFLUX_URL")
INFLUX_TOKEN = os.getenv("INFLUX_TOKEN")
INFLUX_ORG = os.getenv("INFLUX_ORG")
INFLUX_BUCKET = os.getenv("INFLUX_BUCKET", "peft_forge")


def configure_logging(level=None):
    logging.basicConfig(
        level=level or LOG_LEVEL,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
    )
