"""
Django settings for collision_gate project.
"""
from pathlib import Path
from decouple import config

# Build paths inside the project
BASE_DIR = Path(__file__).resolve().parent.parent

# Security settings (no web surface, Django still wants a key)
SECRET_KEY = config('SECRET_KEY', default='collision-gate-local-simulation')
DEBUG = config('DEBUG', default=False, cast=bool)
ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'simulator',
]

# No database is used; tests run as SimpleTestCase
DATABASES = {}

USE_TZ = True
TIME_ZONE = 'UTC'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Simulator defaults (scenario files override these per run)
SIMULATOR = {
    'WORKERS': config('SIMULATOR_WORKERS', default=1, cast=int),
    'TOLERANCE': config('SIMULATOR_TOLERANCE', default=1e-9, cast=float),
    'BASIS_SIZE': config('SIMULATOR_BASIS_SIZE', default=10, cast=int),
    'OPTIMIZER_SEED': config('SIMULATOR_OPTIMIZER_SEED', default=1234, cast=int),
    'OPTIMIZER_STARTS': config('SIMULATOR_OPTIMIZER_STARTS', default=24, cast=int),
    'OCCUPATION_CUTOFF': config('SIMULATOR_OCCUPATION_CUTOFF', default=1e-6, cast=float),
}

# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
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
        'level': 'INFO',
    },
    'loggers': {
        'simulator': {
            'handlers': ['console'],
            'level': config('LOG_LEVEL', default='INFO'),
            'propagate': False,
        },
    },
}
