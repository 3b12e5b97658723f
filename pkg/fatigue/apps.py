from django.apps import AppConfig


class FatigueConfig(AppConfig):
    name = 'fatigue'
    verbose_name = 'LiteFat driver fatigue detection'
