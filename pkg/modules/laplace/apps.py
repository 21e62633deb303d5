"""
Django app configuration for the Laplace module.
"""

from django.apps import AppConfig


class LaplaceConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "modules.laplace"
    verbose_name = "Laplace Posterior"
