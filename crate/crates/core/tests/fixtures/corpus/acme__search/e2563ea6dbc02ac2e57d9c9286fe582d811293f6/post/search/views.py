def search(cursor, term):
    query = "SELECT * FROM items WHERE name = %s"
    cursor.execute(query, (term,))
    return cursor.fetchall()
