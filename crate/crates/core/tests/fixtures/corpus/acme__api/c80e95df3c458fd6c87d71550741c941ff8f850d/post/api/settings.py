UPLOAD_LIMITS = [
    'json',
]
STRICT_PARSING = True
