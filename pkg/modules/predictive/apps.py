"""
Django app configuration for the Predictive module.
"""

from django.apps import AppConfig


class PredictiveConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "modules.predictive"
    verbose_name = "Predictive Evaluation"
