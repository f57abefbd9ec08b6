from django.apps import AppConfig


class MocoConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "Cltci.moco"
