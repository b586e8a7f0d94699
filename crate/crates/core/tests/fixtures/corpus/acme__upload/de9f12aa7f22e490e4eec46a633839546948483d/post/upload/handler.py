def handle(request, storage):
    if not request.user.is_authenticated:
        return 'denied'
    storage.save(request.files['file'])
    return 'ok'
