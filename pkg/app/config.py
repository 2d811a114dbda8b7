import os
from dotenv import load_dotenv

load_dotenv()


def _default_workers() -> int:
    return min(os.cpu_count() or 1, 16)


class Settings:
    # Logging
    LOG_LEVEL = os.getenv("AQD_LOG_LEVEL", "INFO")
    LOG_FILE = os.getenv("AQD_LOG_FILE", "logs/aqd.log")  # empty string disables the file handler

    # Monte Carlo thread pool (never changes results, only wall time)
    WORKERS = int(os.getenv("AQD_WORKERS", _default_workers()))

    # Kappa decoder: gains with |A_j| <= epsilon are treated as singular
    KAPPA_EPSILON = float(os.getenv("AQD_KAPPA_EPSILON", "1e-9"))

    # Reports
    OUTPUT_FORMAT = os.getenv("AQD_OUTPUT_FORMAT", "csv")  # csv or json

    # Sweep script target
    API_URL = os.getenv("AQD_API_URL", "http://localhost:8000")

    @property
    def log_file(self):
        return self.LOG_FILE or None


settings = Settings()
