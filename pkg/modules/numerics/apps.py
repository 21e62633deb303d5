"""
Django app configuration for the Numerics module.
"""

from django.apps import AppConfig


class NumericsConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "modules.numerics"
    verbose_name = "Numerics"
