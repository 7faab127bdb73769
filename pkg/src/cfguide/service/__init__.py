from cfguide.service.app import create_app
from cfguide.service.engine import ReviewEngine
from cfguide.service.store import ReviewItem, SessionStore

__all__ = ["create_app", "ReviewEngine", "ReviewItem", "SessionStore"]
