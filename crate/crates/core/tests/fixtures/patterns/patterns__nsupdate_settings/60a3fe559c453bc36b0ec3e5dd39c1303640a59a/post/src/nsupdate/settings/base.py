SESSION_COOKIE_NAME = 'sessionid'
SESSION_COOKIE_HTTPONLY = True
CSRF_COOKIE_SECURE = False
CSRF_COOKIE_HTTPONLY = True
X_FRAME_OPTIONS = 'DENY'
LANGUAGE_CODE = 'en'
