def content_length(headers):
    values = headers.get_all('Content-Length')
    return int(values[0])
