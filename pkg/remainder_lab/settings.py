from pathlib import Path
import os
from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent.parent
load_dotenv(BASE_DIR / ".env")

SECRET_KEY = os.environ.get("DJANGO_SECRET_KEY", "change-me-in-prod")
DEBUG = os.environ.get("DJANGO_DEBUG", "False") == "True"
ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'taylor',
]

# Flat files only; nothing is persisted in a database.
DATABASES = {}

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
    },
]

USE_I18N = False
USE_TZ = True
TIME_ZONE = 'UTC'

# Experiment defaults (override through .env or the process environment)
LAGRANGE_OUTPUT_DIR = Path(os.environ.get("LAGRANGE_OUTPUT_DIR", BASE_DIR / "out"))
LAGRANGE_N_STEPS = int(os.environ.get("LAGRANGE_N_STEPS", "10000"))
LAGRANGE_XZ_OFFSET = float(os.environ.get("LAGRANGE_XZ_OFFSET", "0.0005"))
LAGRANGE_SCAN_POINTS = int(os.environ.get("LAGRANGE_SCAN_POINTS", "20001"))
LAGRANGE_PROBE_POINTS = int(os.environ.get("LAGRANGE_PROBE_POINTS", "100001"))
LAGRANGE_BOUND_PROBE_POINTS = int(os.environ.get("LAGRANGE_BOUND_PROBE_POINTS", "10001"))
LAGRANGE_SPLINE_GUARD_STEPS = int(os.environ.get("LAGRANGE_SPLINE_GUARD_STEPS", "12"))
LAGRANGE_MODE = os.environ.get("LAGRANGE_MODE", "factored")
LAGRANGE_CONFIG_DIR = BASE_DIR / "taylor" / "configs"

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "loggers": {
        "taylor": {
            "handlers": ["console"],
            "level": os.environ.get("LAGRANGE_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}
