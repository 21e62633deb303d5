"""
Django app configuration for the SWAG module.
"""

from django.apps import AppConfig


class SwagConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "modules.swag"
    verbose_name = "SWAG Posterior"
