"""
Django settings for the flowopt_base development project.

The project exists to run the flowopt management commands and tests; it has no
views and no database models.
"""
import logging.config
import os
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'django-insecure-flowopt-development-only')

DEBUG = True

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'flowopt',
]

# management commands and SimpleTestCase only
DATABASES = {}

USE_TZ = True

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': os.getenv('FLOWOPT_LOG_LEVEL', 'INFO'),
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': os.getenv('DJANGO_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
logging.config.dictConfig(LOGGING)

# Objective and constraint kinds beyond the built-in ones, by dotted path:
# FLOWOPT_FUNCTIONALS = {'my_term': 'myapp.terms.MyTerm'}
# FLOWOPT_CONSTRAINTS = {'my_constraint': 'myapp.constraints.MyConstraint'}
FLOWOPT_FUNCTIONALS = {}
FLOWOPT_CONSTRAINTS = {}

FLOWOPT_PRESETS_DIR = BASE_DIR / 'flowopt' / 'presets'
FLOWOPT_OUTPUT_DIR = Path(os.getenv('FLOWOPT_OUTPUT_DIR', BASE_DIR / 'flowopt_runs'))

try:
    logging.info('Looking for local_settings.py')
    from local_settings import *  # noqa
except ImportError:
    pass
