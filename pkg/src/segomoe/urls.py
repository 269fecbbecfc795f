from __future__ import annotations

from django.urls import path

from segomoe import views

app_name = "segomoe"

urlpatterns = [
    path("v1/sessions", views.create_session, name="sessions"),
    path("v1/sessions/<str:session_id>", views.session_status, name="status"),
    path("v1/sessions/<str:session_id>/ask", views.ask, name="ask"),
    path("v1/sessions/<str:session_id>/tell", views.tell, name="tell"),
    path("v1/sessions/<str:session_id>/results", views.results, name="results"),
]
