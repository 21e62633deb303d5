"""
Django settings for Subspace Bayes.

Only the pieces a command-line numerical project needs: the app registry,
logging and the library defaults in ``SUBSPACE_BAYES``. There is no database
and no HTTP surface.
"""

import os
from pathlib import Path

# Load environment variables from .env file
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Load .env file
env_path = BASE_DIR / ".env"
load_dotenv(dotenv_path=env_path)


SECRET_KEY = os.environ.get("DJANGO_SECRET_KEY", "subspace-bayes-local-only")

DEBUG = os.environ.get("DEBUG", "False") == "True"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
    # Third-party apps
    "rest_framework",
    # Local apps - modules
    "modules.numerics",
    "modules.projections",
    "modules.adapters",
    "modules.swag",
    "modules.laplace",
    "modules.predictive",
    "modules.experiments",
]

# Nothing is persisted in a database; artifacts are files in run directories.
DATABASES = {}


# Internationalization

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Django REST Framework Configuration (serializers only)
REST_FRAMEWORK = {
    "NON_FIELD_ERRORS_KEY": "non_field_errors",
}

# Library defaults. Services fall back to these when a caller passes None.
SUBSPACE_BAYES = {
    "ECE_BINS": 15,
    "POSTERIOR_SAMPLES": 15,
    "SWAG_RANK": 10,
    "SWAG_LR_RATIO": 0.1,
    "PRIOR_GRID": {"LOW": 1e-3, "HIGH": 1e3, "POINTS": 15},
    "LORA_ALPHA": 16.0,
    "WSVD_RIDGE_SCALE": 1e-6,
    "VARIANCE_FLOOR": 1e-12,
    "PROBABILITY_FLOOR": 1e-12,
    "FINITE_DIFFERENCE_STEP": 1e-5,
}

# Logging Configuration
LOG_DIR = Path(os.environ.get("SUBSPACE_LOG_DIR", BASE_DIR / "logs"))
LOG_DIR.mkdir(parents=True, exist_ok=True)

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {module} {process:d} {thread:d} {message}",
            "style": "{",
        },
        "simple": {
            "format": "{levelname} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
        "file": {
            "class": "logging.FileHandler",
            "filename": LOG_DIR / "subspace.log",
            "formatter": "verbose",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": "INFO",
    },
    "loggers": {
        "django": {
            "handlers": ["console", "file"],
            "level": os.environ.get("DJANGO_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
        "modules": {
            "handlers": ["console", "file"],
            "level": os.environ.get("SUBSPACE_LOG_LEVEL", "DEBUG"),
            "propagate": False,
        },
    },
}
