"""
Django app configuration for the Projections module.
"""

from django.apps import AppConfig


class ProjectionsConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "modules.projections"
    verbose_name = "Projections"
