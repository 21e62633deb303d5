"""
Django app configuration for the Adapters module.
"""

from django.apps import AppConfig


class AdaptersConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "modules.adapters"
    verbose_name = "Adapted Networks"
