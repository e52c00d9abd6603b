import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'collision_gate.settings')
django.setup()
