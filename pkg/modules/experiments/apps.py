"""
Django app configuration for the Experiments module.
"""

from django.apps import AppConfig


class ExperimentsConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "modules.experiments"
    verbose_name = "Experiment Pipeline"
