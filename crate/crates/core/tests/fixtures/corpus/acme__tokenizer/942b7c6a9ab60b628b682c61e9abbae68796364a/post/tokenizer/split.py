def split_words(text):
    words = text.split(' ')
    return words
