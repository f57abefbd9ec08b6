from django.apps import AppConfig


class ContrastiveConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "Cltci.contrastive"
