"""
Django settings for the gps-sets project.

For more information on this file, see
https://docs.djangoproject.com/en/5.2/topics/settings/

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'django-insecure-gps-sets-local-experiments-only')

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = os.environ.get('DJANGO_DEBUG', '1') == '1'

ALLOWED_HOSTS = ['localhost', '127.0.0.1']


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'rest_framework',
]

LOCAL_APPS = [
    'apps.gps',
    'apps.experiments',
]

INSTALLED_APPS += LOCAL_APPS

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'config.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


STATIC_URL = 'static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'apps': {
            'handlers': ['console'],
            'level': os.environ.get('GPS_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}


# Set-valued classification defaults; every run starts from this dict,
# then a --config file, then command-line flags.

GPS = {
    'method': 'gps',
    'gamma': 0.05,
    'seed': int(os.environ.get('GPS_SEED', '0')),
    'jobs': 1,

    # tuning grids
    'C_grid': [10 ** e for e in (-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2)],
    'C1_grid': [1.0, 2.0, 3.0],
    'C2_grid': [10 ** e for e in (-1, -0.75, -0.5, -0.25, 0, 0.25, 0.5, 0.75, 1)],
    'sigma_percentiles': [25.0, 37.5, 50.0, 62.5, 75.0],

    # fixed hyperparameters used by train
    'C': 1.0,
    'C1': 1.0,
    'C2': 1.0,
    'sigma': None,
    'sigma_percentile': 50.0,
    'huber_delta': 0.1,
    'nu': None,

    # conformal split and test subset
    'calibration_fraction': 0.5,
    'test_subset_max': 500,
    'calibrate': True,

    # solver
    'tol': 1e-6,
    'max_iter': 10000,

    # constraint tightening
    'gamma_adjust': False,
    'theory_s': 1.0,
    'theory_zeta': 0.05,

    # sweeps and replications
    'sweep_gammas': [0.01, 0.02, 0.05, 0.1],
    'replications': 20,

    # simulated data
    'n_per_class': 500,
    'n_outlier': 200,
    'outlier_rectangles': [
        [6.0, 8.0, -2.0, 2.0],
        [-8.0, -6.0, -2.0, 2.0],
        [-2.0, 2.0, 6.0, 8.0],
        [-2.0, 2.0, -8.0, -6.0],
    ],

    # CSV schema
    'label_column': 'label',
    'outlier_token': 'Outlier',
}
