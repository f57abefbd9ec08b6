"""
Django settings for the Cltci project.

The project hosts the contrastive pretraining / segmentation fine-tuning
toolkit as a set of apps. Nothing is served over HTTP; the ORM keeps a
registry of runs and results and `manage.py` is the command-line entry point.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='cltci-local-development-key')

DEBUG = config('DEBUG', default=True, cast=bool)


# Application definition

INSTALLED_APPS = [
    "django.contrib.auth",
    "django.contrib.contenttypes",

    # Third party apps
    "rest_framework",
    "django_filters",

    # Local apps
    "Cltci.datasets",
    "Cltci.augmentation",
    "Cltci.contrastive",
    "Cltci.moco",
    "Cltci.networks",
    "Cltci.training",
    "Cltci.evaluation",
    "Cltci.runs",
]

MIDDLEWARE = []


# Database
# SQLite keeps a desk run self-contained; point DB_ENGINE at postgresql to
# share one registry between machines.

DB_ENGINE = config('DB_ENGINE', default='sqlite3')

if DB_ENGINE == 'postgresql':
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.postgresql",
            "NAME": config('DB_NAME', default='cltci'),
            "USER": config('DB_USER', default='postgres'),
            "PASSWORD": config('DB_PASSWORD', default=''),
            "HOST": config('DB_HOST', default='localhost'),
            "PORT": config('DB_PORT', default='5432'),
        }
    }
else:
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.sqlite3",
            "NAME": config('DB_NAME', default=str(BASE_DIR / 'cltci.sqlite3')),
        }
    }


# Internationalization

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Toolkit settings

# Data-loading workers; --deterministic forces 0.
CLTCI_NUM_WORKERS = config('CLTCI_NUM_WORKERS', default=0, cast=int)

# Root of the per-run output directories used when neither --out nor paths.out_dir is set.
CLTCI_OUTPUT_ROOT = Path(config('CLTCI_OUTPUT_ROOT', default=str(BASE_DIR / 'runs')))

# Presets shipped with the repository.
CLTCI_CONFIG_DIR = BASE_DIR / 'configs'


# Logging
LOG_LEVEL = config('LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': LOG_LEVEL,
    },
    'loggers': {
        'Cltci': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        # matplotlib and PIL are chatty at INFO/DEBUG
        'matplotlib': {'level': 'WARNING'},
        'PIL': {'level': 'WARNING'},
    },
}
