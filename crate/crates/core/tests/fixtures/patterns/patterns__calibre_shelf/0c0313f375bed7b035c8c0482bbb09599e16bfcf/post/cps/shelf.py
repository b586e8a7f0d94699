from flask import request, redirect, url_for, flash


def create_edit_shelf(shelf, page_title, page, shelf_id=False):
    to_save = request.form.to_dict()
    if not current_user.role_edit_shelfs() and to_save.get("is_public") == "on":
        flash("Sorry you are not allowed to create a public shelf", category="error")
        return redirect(url_for('web.index'))
    is_public = 1 if to_save.get("is_public") == "on" else 0
    if config.config_kobo_sync:
        shelf.kobo_sync = True if to_save.get("kobo_sync") else False
    shelf_title = to_save.get("title", "")
    return shelf_title, is_public
