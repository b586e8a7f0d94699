MAX_BLOCK = 65536


def read_block(stream, size):
    if size > MAX_BLOCK:
        raise ValueError('block too large')
    data = stream.read(size)
    return data
