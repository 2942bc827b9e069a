from django.apps import AppConfig


class FlowoptConfig(AppConfig):
    name = 'flowopt'
    verbose_name = 'Phase-field flow optimization'
