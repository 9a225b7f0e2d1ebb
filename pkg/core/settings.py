"""
Django settings for the alphavb project.

The project has no HTTP surface and no database; Django provides the
settings layer, the management-command CLI and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/6.0/ref/settings/
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# Load environment variables
load_dotenv(BASE_DIR / ".env")

SECRET_KEY = os.getenv("SECRET_KEY", "django-insecure-alphavb-local-only")

DEBUG = os.getenv("DEBUG", "False") == "True"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'alphavb',
]

# No models anywhere in the project.
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/6.0/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
    'UNAUTHENTICATED_USER': None,
    'COERCE_DECIMAL_TO_STRING': False,
}


# Logging

ALPHAVB_LOG_LEVEL = os.getenv("ALPHAVB_LOG_LEVEL", "INFO").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{asctime} {levelname} {name} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "loggers": {
        "alphavb": {
            "handlers": ["console"],
            "level": ALPHAVB_LOG_LEVEL,
            "propagate": False,
        },
    },
}


# Solver / benchmark runtime

# Worker pool size for bench and sweep_alpha; --jobs wins over this.
ALPHAVB_JOBS = int(os.getenv("ALPHAVB_JOBS", "0")) or (os.cpu_count() or 1)
ALPHAVB_OUTPUT_DIR = Path(os.getenv("ALPHAVB_OUTPUT_DIR", str(BASE_DIR / "results")))
ALPHAVB_GAMMA_THRESHOLD = float(os.getenv("ALPHAVB_GAMMA_THRESHOLD", "0.5"))
