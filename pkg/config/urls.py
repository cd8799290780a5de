"""
URL configuration for the gps-sets project.

Only the admin site is served; it is used to browse the experiment ledger.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
