"""
Django settings for the LiteFat project.

The project has no HTTP surface: Django supplies the settings layer, the
management-command CLI (``manage.py``), logging configuration and the test
runner. Everything tunable is read from environment variables so a run can
be reconfigured without touching code.

For the full list of Django settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Only used by Django internals (signing); nothing here is served.
SECRET_KEY = os.environ.get('SECRET_KEY', 'litefat-local-only-key')

DEBUG = os.environ.get('DEBUG', 'False').lower() in ('true', '1', 't')

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    # Third-party apps
    'rest_framework',  # serializers for record/config validation and JSON rendering
    # Local apps
    'fatigue',         # the LiteFat model, data pipeline and CLI commands
]

# No database: the models live in checkpoint files, the data in JSONL files.
DATABASES = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_TZ = True


# ============================================================================
# REST FRAMEWORK CONFIGURATION
# ============================================================================
# Reports and records are written as compact, key-ordered JSON.
REST_FRAMEWORK = {
    'COMPACT_JSON': True,
    'UNICODE_JSON': True,
    'STRICT_JSON': True,
}


# ============================================================================
# LITEFAT CONFIGURATION
# ============================================================================
# Training defaults: at most 100 epochs, stop after
# three epochs without improvement of the training loss, Adam at 1e-4.
LITEFAT = {
    'MAX_EPOCHS': int(os.environ.get('LITEFAT_MAX_EPOCHS', '100')),
    'PATIENCE': int(os.environ.get('LITEFAT_PATIENCE', '3')),
    'LEARNING_RATE': float(os.environ.get('LITEFAT_LEARNING_RATE', '1e-4')),
    'MIN_DELTA': float(os.environ.get('LITEFAT_MIN_DELTA', '1e-6')),
    'BATCH_SIZE': int(os.environ.get('LITEFAT_BATCH_SIZE', '1')),
    'SEED': int(os.environ.get('LITEFAT_SEED', '0')),
    'BENCH_WARMUP': int(os.environ.get('LITEFAT_BENCH_WARMUP', '3')),
}


# ============================================================================
# LOGGING CONFIGURATION
# ============================================================================
# Progress goes to stderr; command results go to stdout or files.
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'progress': {
            'format': '%(asctime)s %(levelname)s %(name)s %(message)s',
        },
    },
    'handlers': {
        'stderr': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'progress',
        },
    },
    'loggers': {
        'fatigue': {
            'handlers': ['stderr'],
            'level': os.environ.get('LITEFAT_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
